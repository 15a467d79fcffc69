"""Public numerics API: Tensor invariants, ops, RNG, autodiff, grad_check."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from meshlm.errors import ConfigError, NumericalError, ShapeError
from meshlm.numerics import (
    Rng, Tensor, frobenius, grad_check, matmul, singular_values, softmax_rows,
)
from meshlm.numerics import autodiff as ad


# ------------------------------------------------------------------ Tensor --

def test_tensor_basic_construction():
    t = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert t.shape == (2, 2)
    assert t.rank == 2
    assert t.dtype == "f64"
    assert t.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert len(t) == 2


def test_tensor_int_input_promotes_to_f64():
    t = Tensor([1, 2, 3])
    assert t.dtype == "f64"
    assert t.numpy().dtype == np.float64


def test_tensor_dtype_switch():
    t32 = Tensor([[1.0]], dtype="f32")
    assert t32.dtype == "f32"
    t64 = Tensor(np.zeros((2, 2), dtype=np.float32), dtype="f64")
    assert t64.dtype == "f64"
    with pytest.raises(ShapeError):
        Tensor([1.0], dtype="f16")


def test_tensor_rank_bounds():
    with pytest.raises(ShapeError):
        Tensor(3.0)  # rank 0
    with pytest.raises(ShapeError):
        Tensor(np.zeros((1, 1, 1, 1)))  # rank 4
    assert Tensor(np.zeros((2, 3, 4))).rank == 3


def test_tensor_rejects_non_finite():
    with pytest.raises(NumericalError):
        Tensor([1.0, float("nan")])
    with pytest.raises(NumericalError):
        Tensor([[float("inf")]])


def test_tensor_is_immutable():
    t = Tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        t.numpy()[0] = 9.0
    assert t.tolist() == [1.0, 2.0]


def test_tensor_zeros_and_equality():
    z = Tensor.zeros((2, 3))
    assert z.shape == (2, 3) and frobenius(z) == 0.0
    assert Tensor([1.0, 2.0]) == Tensor([1.0, 2.0])
    assert Tensor([1.0, 2.0]) != Tensor([1.0, 3.0])
    assert Tensor([1.0], dtype="f32") != Tensor([1.0], dtype="f64")


# ------------------------------------------------------------------ matmul --

def test_matmul_identity():
    m = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert matmul(Tensor(np.eye(2)), m) == m


def test_matmul_projector():
    p = Tensor([[1.0, 0.0], [0.0, 0.0]])
    x = Tensor([[5.0, 6.0], [7.0, 8.0]])
    assert matmul(p, x) == Tensor([[5.0, 6.0], [0.0, 0.0]])


def test_matmul_matches_triple_loop_zero_ulp(rng):
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((4, 2))
    want = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            for p in range(4):
                want[i, j] += a[i, p] * b[p, j]
    assert np.array_equal(matmul(Tensor(a), Tensor(b)).numpy(), want)


def test_matmul_validates_operands():
    with pytest.raises(ShapeError):
        matmul(Tensor([[1.0, 2.0]]), Tensor([[1.0, 2.0]]))  # inner dims
    with pytest.raises(ShapeError):
        matmul(Tensor([1.0, 2.0]), Tensor([[1.0], [2.0]]))  # rank 1
    with pytest.raises(ShapeError):
        matmul(Tensor([[1.0]], dtype="f32"), Tensor([[1.0]], dtype="f64"))


# ------------------------------------------------------------ softmax_rows --

def test_softmax_uniform_logits():
    out = softmax_rows(Tensor([[0.0, 0.0, 0.0]]))
    assert np.allclose(out.numpy(), [[1 / 3, 1 / 3, 1 / 3]], atol=1e-15)


def test_softmax_large_logit_is_stable():
    out = softmax_rows(Tensor([[1000.0, 0.0]])).numpy()
    assert out[0, 0] == pytest.approx(1.0)
    assert out[0, 1] == pytest.approx(0.0, abs=1e-300)


def test_softmax_log_logits_closed_form():
    x = Tensor([[math.log(1.0), math.log(2.0), math.log(3.0)]])
    assert np.allclose(softmax_rows(x).numpy(), [[1 / 6, 2 / 6, 3 / 6]],
                       atol=1e-15)


def test_softmax_rank_check():
    with pytest.raises(ShapeError):
        softmax_rows(Tensor([1.0, 2.0]))


@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2,
                                               min_side=1, max_side=6),
                  elements=st.floats(-100, 100)))
def test_softmax_rows_sum_to_one_f64(x):
    out = softmax_rows(Tensor(x)).numpy()
    assert np.all(out >= 0.0)
    assert np.max(np.abs(out.sum(axis=1) - 1.0)) <= 1e-12


@given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=2, max_dims=2,
                                               min_side=1, max_side=6),
                  elements=st.floats(-50, 50, width=32)))
def test_softmax_rows_sum_to_one_f32(x):
    out = softmax_rows(Tensor(x)).numpy()
    assert out.dtype == np.float32
    assert np.max(np.abs(out.sum(axis=1) - 1.0)) <= 1e-6


# --------------------------------------------------------------- frobenius --

def test_frobenius_examples():
    assert frobenius(Tensor.zeros((2, 2))) == 0.0
    assert frobenius(Tensor([[3.0, 4.0]])) == pytest.approx(5.0, rel=1e-15)


def test_frobenius_matches_scalar_loop(rng):
    x = rng.standard_normal((5, 7))
    acc = 0.0
    for v in x.reshape(-1):
        acc += float(v) * float(v)
    want = math.sqrt(acc)
    assert frobenius(Tensor(x)) == pytest.approx(want, rel=1e-12)


def test_frobenius_orthogonal_invariance(rng):
    x = rng.standard_normal((6, 4))
    q_left, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    q_right, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    base = frobenius(Tensor(x))
    assert frobenius(Tensor(q_left @ x)) == pytest.approx(base, rel=1e-10)
    assert frobenius(Tensor(x @ q_right)) == pytest.approx(base, rel=1e-10)


# --------------------------------------------------------- singular_values --

def test_singular_values_identity():
    sv = singular_values(Tensor(np.eye(3)), 3)
    assert np.allclose(sv, [1.0, 1.0, 1.0], atol=1e-12)


def test_singular_values_rect_diagonal():
    x = np.zeros((4, 3))
    x[0, 0], x[1, 1], x[2, 2] = 3.0, 2.0, 1.0
    sv = singular_values(Tensor(x), 3)
    assert np.allclose(sv, [3.0, 2.0, 1.0], atol=1e-12)


def test_singular_values_rank_one(rng):
    u = rng.standard_normal(5)
    v = rng.standard_normal(4)
    sv = singular_values(Tensor(np.outer(u, v)), 4)
    assert sv[0] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v),
                                  rel=1e-12)
    assert np.all(sv[1:] <= 1e-8)


def test_singular_values_invariances(rng):
    x = rng.standard_normal((7, 5))
    base = singular_values(Tensor(x), 5)
    perm = rng.permutation(7)
    assert np.max(np.abs(singular_values(Tensor(x[perm]), 5) - base)) <= 1e-8
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    assert np.max(np.abs(singular_values(Tensor(x @ q), 5) - base)) <= 1e-8


def test_singular_values_wide_matrix_uses_row_gram(rng):
    x = rng.standard_normal((3, 8))
    sv = singular_values(Tensor(x), 3)
    want = np.linalg.svd(x, compute_uv=False)
    assert np.allclose(sv, want, atol=1e-9)
    assert np.all(np.diff(sv) <= 1e-12)  # nonincreasing
    assert np.all(sv >= 0.0)


def test_singular_values_top_k_range():
    x = Tensor(np.eye(3))
    assert singular_values(x, 1).shape == (1,)
    with pytest.raises(ShapeError):
        singular_values(x, 4)
    with pytest.raises(ShapeError):
        singular_values(x, 0)
    with pytest.raises(ShapeError):
        singular_values(Tensor([1.0, 2.0]), 1)


# --------------------------------------------------------------------- Rng --

def test_rng_is_deterministic():
    a = Rng(7, 3).normal((4, 5))
    b = Rng(7, 3).normal((4, 5))
    assert np.array_equal(a, b)


def test_rng_seed_and_stream_change_output():
    base = Rng(7, 3).normal((8,))
    assert not np.array_equal(Rng(8, 3).normal((8,)), base)
    assert not np.array_equal(Rng(7, 4).normal((8,)), base)


def test_rng_split_is_stable_and_independent():
    r = Rng(42)
    first = r.split("embed").normal((6,))
    r.normal((100,))  # advancing the parent must not move child streams
    again = r.split("embed").normal((6,))
    assert np.array_equal(first, again)
    other = r.split("head").normal((6,))
    assert not np.array_equal(first, other)


def test_rng_split_nests():
    a = Rng(1).split("block").split("attn").normal((4,))
    b = Rng(1).split("block").split("attn").normal((4,))
    c = Rng(1).split("attn").split("block").normal((4,))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_integers_range():
    vals = Rng(0).integers(2, 9, size=200)
    assert vals.min() >= 2 and vals.max() < 9


def test_rng_std_and_dtype():
    x = Rng(5).normal((2000,), std=0.02, dtype=np.float32)
    assert x.dtype == np.float32
    assert abs(float(np.std(x)) - 0.02) < 0.002


# ------------------------------------------------- autodiff: per-op checks --

def _var(rng, shape, scale=1.0):
    return ad.Var(rng.standard_normal(shape) * scale, requires_grad=True)


def test_elementwise_ops_grad(rng):
    p = _var(rng, (2, 3))
    q = _var(rng, (2, 3))
    const = rng.standard_normal((2, 3))

    def fn():
        y = ad.mul(ad.add(p, q), ad.sub(p, ad.cmul(q, 0.7)))
        return ad.sumall(ad.gelu(ad.cadd(y, const)))

    assert grad_check(fn, {"p": p, "q": q}) <= 1e-6


def test_matmul_family_grads(rng):
    a = _var(rng, (3, 4))
    b = _var(rng, (4, 2))
    c = _var(rng, (2, 4))

    def fn():
        y = ad.gelu(ad.matmul(a, b))       # (3, 2)
        z = ad.matmul_tb(a, c)             # (3, 2)
        return ad.sumall(ad.mul(y, z))

    assert grad_check(fn, {"a": a, "b": b, "c": c}) <= 1e-6


def test_bmm_family_grads(rng):
    a = _var(rng, (2, 3, 4))
    b = _var(rng, (2, 4, 2))
    c = _var(rng, (2, 5, 4))

    def fn():
        y = ad.sumall(ad.gelu(ad.bmm(a, b)))
        z = ad.sumall(ad.gelu(ad.bmm_tb(a, c)))
        return ad.add(y, z)

    assert grad_check(fn, {"a": a, "b": b, "c": c}) <= 1e-6


def test_head_reshape_and_slice_grads(rng):
    x = _var(rng, (4, 6))

    def fn():
        heads = ad.split_heads(x, 3)           # (3, 4, 2)
        back = ad.merge_heads(ad.gelu(heads))  # (4, 6)
        return ad.sumall(ad.mul(ad.slice_col(back, 1), ad.slice_col(x, 4)))

    assert grad_check(fn, {"x": x}) <= 1e-6


def test_softmax_rows_grad_2d_and_3d(rng):
    x2 = _var(rng, (3, 5))
    w2 = _var(rng, (3, 5))
    x3 = _var(rng, (2, 3, 4))
    w3 = _var(rng, (2, 3, 4))

    def fn():
        y = ad.sumall(ad.mul(ad.softmax_rows(x2), w2))
        z = ad.sumall(ad.mul(ad.softmax_rows(x3), w3))
        return ad.add(y, z)

    params = {"x2": x2, "w2": w2, "x3": x3, "w3": w3}
    assert grad_check(fn, params) <= 1e-6


def test_layernorm_grad(rng):
    x = _var(rng, (4, 6))
    g = ad.Var(1.0 + 0.1 * rng.standard_normal(6), requires_grad=True)
    b = _var(rng, (6,), scale=0.1)
    w = rng.standard_normal((4, 6))

    def fn():
        return ad.sumall(ad.mul(ad.layernorm(x, g, b), ad.Var(w)))

    assert grad_check(fn, {"x": x, "g": g, "b": b}) <= 1e-6


def test_gelu_grad(rng):
    x = _var(rng, (3, 4), scale=2.0)

    def fn():
        return ad.sumall(ad.gelu(x))

    assert grad_check(fn, {"x": x}) <= 1e-6


def test_rotary_grad(rng):
    x = _var(rng, (2, 5, 4))  # (heads, positions, head dim)
    ang = rng.standard_normal((5, 2))
    cos, sin = np.cos(ang), np.sin(ang)
    w = rng.standard_normal((2, 5, 4))

    def fn():
        return ad.sumall(ad.mul(ad.rotary(x, cos, sin), ad.Var(w)))

    assert grad_check(fn, {"x": x}) <= 1e-6


def test_rotary_preserves_pair_norms(rng):
    x = rng.standard_normal((2, 5, 6))
    ang = rng.standard_normal((5, 3))
    y = ad.rotary(ad.Var(x), np.cos(ang), np.sin(ang)).data
    old = x[..., :3] ** 2 + x[..., 3:] ** 2
    new = y[..., :3] ** 2 + y[..., 3:] ** 2
    assert np.allclose(old, new, atol=1e-12)


def test_embedding_grad(rng):
    table = _var(rng, (7, 4))
    ids = np.array([3, 0, 3, 6, 1])  # repeated row: gradients must add

    def fn():
        return ad.sumall(ad.gelu(ad.embedding(table, ids)))

    assert grad_check(fn, {"table": table}) <= 1e-6


def test_cross_entropy_value_and_grad(rng):
    logits = _var(rng, (4, 9))
    targets = np.array([1, 0, 8, 4])

    uniform = ad.cross_entropy(ad.Var(np.zeros((3, 13))), np.array([0, 5, 12]))
    assert uniform.data[0] == pytest.approx(math.log(13.0), rel=1e-12)

    def fn():
        return ad.cross_entropy(logits, targets)

    assert grad_check(fn, {"logits": logits}) <= 1e-6


def test_lincomb3_and_mean_rows_grads(rng):
    coefs = ad.Var(np.array([1.0, 0.0, 0.0]), requires_grad=True)
    x1, x2, x3 = (_var(rng, (2, 3)) for _ in range(3))

    def fn():
        y = ad.lincomb3(coefs, x1, x2, x3)
        return ad.sumall(ad.gelu(ad.mean_rows(y)))

    params = {"coefs": coefs, "x1": x1, "x2": x2, "x3": x3}
    assert grad_check(fn, params) <= 1e-6
    with pytest.raises(ShapeError):
        ad.lincomb3(ad.Var(np.ones(4)), x1, x2, x3)


def test_backward_requires_scalar_root(rng):
    x = _var(rng, (2, 2))
    with pytest.raises(ShapeError):
        ad.backward(ad.gelu(x))


def test_no_grad_graph_is_pruned(rng):
    frozen = ad.Var(rng.standard_normal((3, 3)))
    out = ad.sumall(ad.gelu(ad.matmul(frozen, frozen)))
    assert not out.requires_grad
    assert out._parents == ()


# -------------------------------------------------------------- grad_check --

def test_grad_check_linear_is_exact(rng):
    w = _var(rng, (3, 4))
    x = ad.Var(rng.standard_normal((4, 2)))

    def fn():
        return ad.sumall(ad.matmul(w, x))

    assert grad_check(fn, {"w": w}) <= 1e-9


def test_grad_check_two_layer_net(rng):
    w1 = _var(rng, (6, 10), scale=0.5)
    w2 = _var(rng, (10, 5), scale=0.5)
    b1 = _var(rng, (1, 10), scale=0.1)
    x = ad.Var(rng.standard_normal((4, 6)))
    targets = np.array([0, 3, 2, 4])

    def fn():
        h = ad.gelu(ad.add(ad.matmul(x, w1), b1))
        return ad.cross_entropy(ad.matmul(h, w2), targets)

    err = grad_check(fn, {"w1": w1, "w2": w2, "b1": b1}, eps=1e-4)
    assert err <= 1e-4


def test_grad_check_sampling_is_deterministic(rng):
    w = _var(rng, (5, 8))
    x = ad.Var(rng.standard_normal((8, 3)))

    def fn():
        return ad.sumall(ad.gelu(ad.matmul(w, x)))

    full = grad_check(fn, {"w": w})
    s1 = grad_check(fn, {"w": w}, samples_per_tensor=5, seed=11)
    s2 = grad_check(fn, {"w": w}, samples_per_tensor=5, seed=11)
    assert s1 == s2
    assert s1 <= full


def test_grad_check_rejects_f32():
    w = ad.Var(np.ones((2, 2), dtype=np.float32), requires_grad=True)
    with pytest.raises(ConfigError):
        grad_check(lambda: ad.sumall(w), {"w": w})
