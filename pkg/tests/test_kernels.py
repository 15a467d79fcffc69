"""Kernel backends against scalar-loop oracles.

The matmul family must match a naive triple loop to 0 ulp (identical
summation order), and the two backends must agree bitwise on it.
"""

import math

import numpy as np
import pytest

from meshlm import backend
from meshlm.errors import ConfigError
from meshlm.kernels import numpy_impl

IMPLS = [pytest.param(numpy_impl, id="numpy")]
if backend.HAS_NUMBA:
    from meshlm.kernels import numba_impl
    IMPLS.append(pytest.param(numba_impl, id="numba"))


def triple_loop_matmul(a, b):
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=a.dtype)
    for i in range(n):
        for j in range(m):
            acc = out[i, j]
            for p in range(k):
                acc += a[i, p] * b[p, j]
            out[i, j] = acc
    return out


@pytest.mark.parametrize("impl", IMPLS)
@pytest.mark.parametrize("dt", [np.float64, np.float32])
def test_matmul_matches_triple_loop_bitwise(impl, dt, rng):
    a = rng.standard_normal((3, 4)).astype(dt)
    b = rng.standard_normal((4, 2)).astype(dt)
    got = impl.matmul(a, b)
    want = triple_loop_matmul(a, b)
    assert got.dtype == dt
    assert np.array_equal(got, want)  # 0 ulp


@pytest.mark.parametrize("impl", IMPLS)
def test_matmul_identity_and_projector(impl):
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(impl.matmul(np.eye(2), m), m)
    proj = np.array([[1.0, 0.0], [0.0, 0.0]])
    x = np.array([[5.0, 6.0], [7.0, 8.0]])
    assert np.array_equal(impl.matmul(proj, x), [[5.0, 6.0], [0.0, 0.0]])


@pytest.mark.skipif(not backend.HAS_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("dt", [np.float64, np.float32])
def test_matmul_family_bitwise_across_backends(dt, rng):
    a = rng.standard_normal((5, 7)).astype(dt)
    b = rng.standard_normal((7, 6)).astype(dt)
    c = rng.standard_normal((6, 7)).astype(dt)
    assert np.array_equal(numpy_impl.matmul(a, b), numba_impl.matmul(a, b))
    assert np.array_equal(numpy_impl.matmul_tb(a, c), numba_impl.matmul_tb(a, c))
    assert np.array_equal(numpy_impl.matmul_ta(a, b[:5]), numba_impl.matmul_ta(a, b[:5]))


@pytest.mark.parametrize("impl", IMPLS)
def test_matmul_tb_ta_against_loops(impl, rng):
    a = rng.standard_normal((4, 6))
    b = rng.standard_normal((5, 6))
    want = np.zeros((4, 5))
    for i in range(4):
        for j in range(5):
            acc = 0.0
            for p in range(6):
                acc += a[i, p] * b[j, p]
            want[i, j] = acc
    assert np.array_equal(impl.matmul_tb(a, b), want)

    c = rng.standard_normal((6, 3))
    d = rng.standard_normal((6, 4))
    want = np.zeros((3, 4))
    for p in range(6):
        for i in range(3):
            for j in range(4):
                want[i, j] += c[p, i] * d[p, j]
    assert np.array_equal(impl.matmul_ta(c, d), want)


@pytest.mark.parametrize("impl", IMPLS)
def test_bmm_family_matches_per_slice(impl, rng):
    a = rng.standard_normal((3, 4, 5))
    b = rng.standard_normal((3, 5, 2))
    got = impl.bmm(a, b)
    for h in range(3):
        assert np.array_equal(got[h], impl.matmul(a[h], b[h]))
    c = rng.standard_normal((3, 6, 5))
    got = impl.bmm_tb(a, c)
    for h in range(3):
        assert np.array_equal(got[h], impl.matmul_tb(a[h], c[h]))
    d = rng.standard_normal((3, 4, 2))
    got = impl.bmm_ta(a, d)
    for h in range(3):
        assert np.array_equal(got[h], impl.matmul_ta(a[h], d[h]))


@pytest.mark.parametrize("impl", IMPLS)
def test_softmax_rows_examples(impl):
    x = np.array([[0.0, 0.0, 0.0]])
    assert np.allclose(impl.softmax_rows(x), [[1 / 3, 1 / 3, 1 / 3]], atol=1e-15)

    x = np.array([[1000.0, 0.0]])
    y = impl.softmax_rows(x)
    assert np.all(np.isfinite(y))
    assert y[0, 0] == pytest.approx(1.0, abs=1e-12)

    x = np.log(np.array([[1.0, 2.0, 3.0]]))
    assert np.allclose(impl.softmax_rows(x), [[1 / 6, 2 / 6, 3 / 6]], atol=1e-15)


@pytest.mark.parametrize("impl", IMPLS)
def test_softmax_row_sums_and_backward(impl, rng):
    x = rng.standard_normal((40, 9)) * 5
    y = impl.softmax_rows(x)
    assert np.allclose(y.sum(axis=1), 1.0, atol=1e-12)
    # backward vs central differences of sum(y * w)
    w = rng.standard_normal((40, 9))
    dy = impl.softmax_bwd(y, w)
    eps = 1e-6
    for idx in [(0, 0), (3, 5), (39, 8)]:
        xp = x.copy()
        xp[idx] += eps
        xm = x.copy()
        xm[idx] -= eps
        fd = (np.sum(impl.softmax_rows(xp) * w) -
              np.sum(impl.softmax_rows(xm) * w)) / (2 * eps)
        assert dy[idx] == pytest.approx(fd, abs=1e-7)


@pytest.mark.parametrize("impl", IMPLS)
def test_layernorm_forward_and_backward(impl, rng):
    x = rng.standard_normal((6, 10))
    g = rng.standard_normal(10)
    b = rng.standard_normal(10)
    eps = 1e-5
    y, mean, rstd = impl.layernorm_fwd(x, g, b, eps)
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    want = (x - mu) / np.sqrt(var + eps) * g + b
    assert np.allclose(y, want, atol=1e-12)

    w = rng.standard_normal((6, 10))
    dx, dg, db = impl.layernorm_bwd(x, g, mean, rstd, w)
    fd_eps = 1e-6

    def f(xx, gg, bb):
        return np.sum(impl.layernorm_fwd(xx, gg, bb, eps)[0] * w)

    for idx in [(0, 0), (2, 7), (5, 9)]:
        xp = x.copy(); xp[idx] += fd_eps
        xm = x.copy(); xm[idx] -= fd_eps
        fd = (f(xp, g, b) - f(xm, g, b)) / (2 * fd_eps)
        assert dx[idx] == pytest.approx(fd, abs=1e-6)
    gp = g.copy(); gp[3] += fd_eps
    gm = g.copy(); gm[3] -= fd_eps
    assert dg[3] == pytest.approx((f(x, gp, b) - f(x, gm, b)) / (2 * fd_eps), abs=1e-6)
    bp = b.copy(); bp[4] += fd_eps
    bm = b.copy(); bm[4] -= fd_eps
    assert db[4] == pytest.approx((f(x, g, bp) - f(x, g, bm)) / (2 * fd_eps), abs=1e-6)


@pytest.mark.parametrize("impl", IMPLS)
def test_gelu_values_and_grad(impl, rng):
    x = rng.standard_normal((4, 5))
    y = impl.gelu_fwd(x)
    c = math.sqrt(2 / math.pi)
    want = 0.5 * x * (1 + np.tanh(c * (x + 0.044715 * x ** 3)))
    assert np.allclose(y, want, atol=1e-12)

    dy = rng.standard_normal((4, 5))
    dx = impl.gelu_bwd(x, dy)
    eps = 1e-6
    for idx in [(0, 0), (3, 4)]:
        xp = x.copy(); xp[idx] += eps
        xm = x.copy(); xm[idx] -= eps
        fd = (np.sum(impl.gelu_fwd(xp) * dy) - np.sum(impl.gelu_fwd(xm) * dy)) / (2 * eps)
        assert dx[idx] == pytest.approx(fd, abs=1e-7)


@pytest.mark.parametrize("impl", IMPLS)
def test_rotary_rotates_pairs(impl):
    # one head, two positions, head dim 4 -> pairs (0,2) and (1,3)
    x = np.ones((1, 2, 4))
    cos = np.cos(np.array([[0.0, 0.0], [1.0, 0.5]]))
    sin = np.sin(np.array([[0.0, 0.0], [1.0, 0.5]]))
    y = impl.rotary(x, cos, sin)
    # position 0 has angle 0 -> unchanged
    assert np.allclose(y[0, 0], x[0, 0], atol=1e-15)
    # rotations preserve the norm of each (x1, x2) pair
    n_in = np.hypot(x[0, 1, 0], x[0, 1, 2])
    n_out = np.hypot(y[0, 1, 0], y[0, 1, 2])
    assert n_out == pytest.approx(n_in, abs=1e-12)
    assert y[0, 1, 0] == pytest.approx(math.cos(1.0) - math.sin(1.0), abs=1e-12)
    assert y[0, 1, 2] == pytest.approx(math.cos(1.0) + math.sin(1.0), abs=1e-12)


@pytest.mark.parametrize("impl", IMPLS)
def test_cross_entropy_uniform_and_grad(impl, rng):
    logits = np.zeros((7, 13))
    targets = np.arange(7, dtype=np.int64) % 13
    loss, probs = impl.ce_fwd(logits, targets)
    assert loss == pytest.approx(math.log(13), abs=1e-12)
    assert np.allclose(probs, 1 / 13, atol=1e-15)

    logits = rng.standard_normal((5, 11))
    targets = rng.integers(0, 11, size=5).astype(np.int64)
    loss, probs = impl.ce_fwd(logits, targets)
    d = impl.ce_bwd(probs, targets, 1.0)
    eps = 1e-6
    for idx in [(0, 0), (4, 10), (2, int(targets[2]))]:
        lp = logits.copy(); lp[idx] += eps
        lm = logits.copy(); lm[idx] -= eps
        fd = (impl.ce_fwd(lp, targets)[0] - impl.ce_fwd(lm, targets)[0]) / (2 * eps)
        assert d[idx] == pytest.approx(fd, abs=1e-8)


@pytest.mark.parametrize("impl", IMPLS)
def test_adamw_single_step_oracle(impl):
    # f(w) = w^2 at w=1: grad 2, lr 0.1, wd 0
    p = np.array([1.0])
    g = np.array([2.0])
    m = np.zeros(1)
    v = np.zeros(1)
    b1, b2, eps, lr = 0.9, 0.95, 1e-8, 0.1
    impl.adamw_update(p, g, m, v, 1, lr, b1, b2, eps, 0.0)
    mh = (0.1 * 2.0) / (1 - 0.9)
    vh = (0.05 * 4.0) / (1 - 0.95)
    want = 1.0 - lr * mh / (math.sqrt(vh) + eps)
    assert p[0] == pytest.approx(want, abs=1e-15)


@pytest.mark.parametrize("impl", IMPLS)
def test_adamw_decay_only(impl):
    p = np.array([3.0])
    g = np.zeros(1)
    m = np.zeros(1)
    v = np.zeros(1)
    impl.adamw_update(p, g, m, v, 1, 0.1, 0.9, 0.95, 1e-8, 0.01)
    assert p[0] == pytest.approx(3.0 * (1 - 0.1 * 0.01), abs=1e-15)


@pytest.mark.parametrize("impl", IMPLS)
def test_adamw_zero_grad_zero_decay_is_identity(impl):
    p = np.array([2.5, -1.0])
    before = p.copy()
    impl.adamw_update(p, np.zeros(2), np.zeros(2), np.zeros(2),
                      1, 0.1, 0.9, 0.95, 1e-8, 0.0)
    assert np.array_equal(p, before)


@pytest.mark.parametrize("impl", IMPLS)
def test_sumsq(impl):
    assert impl.sumsq(np.array([[3.0, 4.0]])) == pytest.approx(25.0, abs=0)
    assert impl.sumsq(np.zeros((2, 2))) == 0.0


@pytest.mark.parametrize("impl", IMPLS)
def test_jacobi_eigvals_diag_and_random(impl, rng):
    d = np.diag([5.0, 2.0, 9.0])
    w = np.sort(impl.jacobi_eigvals(d, 1e-10, 60))
    assert np.allclose(w, [2.0, 5.0, 9.0], atol=0)

    a = rng.standard_normal((12, 12))
    sym = (a + a.T) / 2
    w = np.sort(impl.jacobi_eigvals(sym, 1e-10, 60))
    want = np.sort(np.linalg.eigvalsh(sym))
    assert np.allclose(w, want, atol=1e-9)


def test_select_backend_env_override(monkeypatch):
    monkeypatch.setenv("MESHLM_BACKEND", "numpy")
    assert backend.select_backend() == "numpy"
    monkeypatch.setenv("MESHLM_BACKEND", "auto")
    assert backend.select_backend() in ("numba", "numpy")
    monkeypatch.setenv("MESHLM_BACKEND", "bogus")
    with pytest.raises(ConfigError):
        backend.select_backend()
