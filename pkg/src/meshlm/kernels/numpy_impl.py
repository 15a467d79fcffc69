"""Pure numpy kernels (reference backend).

Summation order matters: every matmul accumulates over the inner dimension
left to right, one rank-1 update per step, which performs the exact same IEEE
op sequence per output element as the numba backend and as a naive triple
loop. BLAS matmul is deliberately not used anywhere (its summation order is
unspecified).
"""

import numpy as np

GELU_C = 0.7978845608028654  # sqrt(2/pi)
GELU_K = 0.044715


# ---------------------------------------------------------------- matmul ---

def matmul(a, b):
    """a @ b with left-to-right accumulation over the inner dim."""
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=a.dtype)
    for p in range(k):
        out += a[:, p:p + 1] * b[p:p + 1, :]
    return out


def matmul_tb(a, b):
    """a @ b.T; out[i, j] = sum_p a[i, p] * b[j, p], p ascending."""
    n, k = a.shape
    m = b.shape[0]
    out = np.zeros((n, m), dtype=a.dtype)
    for p in range(k):
        out += a[:, p:p + 1] * b[:, p][None, :]
    return out


def matmul_ta(a, b):
    """a.T @ b; out[i, j] = sum_p a[p, i] * b[p, j], p ascending."""
    k, n = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=a.dtype)
    for p in range(k):
        out += a[p, :][:, None] * b[p, :][None, :]
    return out


def bmm(a, b):
    h = a.shape[0]
    out = np.empty((h, a.shape[1], b.shape[2]), dtype=a.dtype)
    for i in range(h):
        out[i] = matmul(a[i], b[i])
    return out


def bmm_tb(a, b):
    h = a.shape[0]
    out = np.empty((h, a.shape[1], b.shape[1]), dtype=a.dtype)
    for i in range(h):
        out[i] = matmul_tb(a[i], b[i])
    return out


def bmm_ta(a, b):
    h = a.shape[0]
    out = np.empty((h, a.shape[2], b.shape[2]), dtype=a.dtype)
    for i in range(h):
        out[i] = matmul_ta(a[i], b[i])
    return out


# --------------------------------------------------------------- softmax ---

def softmax_rows(x):
    """Row softmax with max subtraction; x is 2-D."""
    mx = np.max(x, axis=1, keepdims=True)
    e = np.exp(x - mx)
    return e / np.sum(e, axis=1, keepdims=True)


def softmax_bwd(y, dy):
    dot = np.sum(y * dy, axis=1, keepdims=True)
    return y * (dy - dot)


# ------------------------------------------------------------- layernorm ---

def layernorm_fwd(x, g, b, eps):
    mean = np.mean(x, axis=1)
    var = np.mean((x - mean[:, None]) ** 2, axis=1)
    rstd = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.dtype))
    xhat = (x - mean[:, None]) * rstd[:, None]
    return xhat * g[None, :] + b[None, :], mean, rstd


def layernorm_bwd(x, g, mean, rstd, dy):
    xhat = (x - mean[:, None]) * rstd[:, None]
    dxhat = dy * g[None, :]
    m1 = np.mean(dxhat, axis=1, keepdims=True)
    m2 = np.mean(dxhat * xhat, axis=1, keepdims=True)
    dx = rstd[:, None] * (dxhat - m1 - xhat * m2)
    dg = np.sum(dy * xhat, axis=0)
    db = np.sum(dy, axis=0)
    return dx, dg, db


# ------------------------------------------------------------------ gelu ---

def gelu_fwd(x):
    c = np.asarray(GELU_C, dtype=x.dtype)
    k = np.asarray(GELU_K, dtype=x.dtype)
    t = np.tanh(c * (x + k * x * x * x))
    return np.asarray(0.5, dtype=x.dtype) * x * (1.0 + t)


def gelu_bwd(x, dy):
    c = np.asarray(GELU_C, dtype=x.dtype)
    k = np.asarray(GELU_K, dtype=x.dtype)
    t = np.tanh(c * (x + k * x * x * x))
    du = c * (1.0 + 3.0 * k * x * x)
    grad = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
    return (dy * grad).astype(x.dtype, copy=False)


# ---------------------------------------------------------------- rotary ---

def rotary(x, cos, sin):
    """Rotate-half position encoding on (H, L, dh); cos/sin are (L, dh/2)."""
    half = x.shape[2] // 2
    x1 = x[:, :, :half]
    x2 = x[:, :, half:]
    out = np.empty_like(x)
    out[:, :, :half] = x1 * cos[None, :, :] - x2 * sin[None, :, :]
    out[:, :, half:] = x1 * sin[None, :, :] + x2 * cos[None, :, :]
    return out


# --------------------------------------------------------- cross entropy ---

def ce_fwd(logits, targets):
    """Mean next-token cross entropy in nats. Returns (loss, probs)."""
    n = logits.shape[0]
    mx = np.max(logits, axis=1, keepdims=True)
    e = np.exp(logits - mx)
    z = np.sum(e, axis=1, keepdims=True)
    probs = e / z
    picked = logits[np.arange(n), targets]
    losses = (np.log(z[:, 0]) + mx[:, 0]) - picked
    return float(np.mean(losses.astype(np.float64))), probs


def ce_bwd(probs, targets, gscale):
    n = probs.shape[0]
    d = probs * np.asarray(gscale / n, dtype=probs.dtype)
    d[np.arange(n), targets] -= np.asarray(gscale / n, dtype=probs.dtype)
    return d


# ----------------------------------------------------------------- adamw ---

def adamw_update(p, g, m, v, t, lr, b1, b2, eps, wd):
    """In-place AdamW with decoupled weight decay.

    p, g are flat arrays in the model dtype; m, v are f64 moment buffers.
    Update math runs in f64 and rounds on store.
    """
    g64 = g.astype(np.float64)
    m[:] = b1 * m + (1.0 - b1) * g64
    v[:] = b2 * v + (1.0 - b2) * g64 * g64
    mh = m / (1.0 - b1 ** t)
    vh = v / (1.0 - b2 ** t)
    p64 = p.astype(np.float64)
    upd = p64 - lr * (mh / (np.sqrt(vh) + eps) + wd * p64)
    p[:] = upd.astype(p.dtype)


# ------------------------------------------------------------ reductions ---

def sumsq(x):
    """Sum of squares accumulated in f64. Returns a python float."""
    xs = np.ascontiguousarray(x).ravel().astype(np.float64)
    return float(np.sum(xs * xs))


# ---------------------------------------------------------------- jacobi ---

def jacobi_eigvals(a_in, rel_tol, max_sweeps):
    """Eigenvalues of a symmetric matrix by cyclic-by-rows Jacobi.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    rel_tol * ||A||_F. Returns the (unsorted) diagonal.
    """
    a = a_in.astype(np.float64).copy()
    n = a.shape[0]
    if n == 1:
        return a.diagonal().copy()
    fro = np.sqrt(np.sum(a * a))
    tol = rel_tol * fro if fro > 0.0 else 0.0
    # a vanishing pivot can overflow theta; the rotation then degenerates to
    # the identity, which is exactly what such entries deserve
    with np.errstate(over="ignore"):
        for _ in range(max_sweeps):
            off = np.sqrt(np.sum(a * a) - np.sum(a.diagonal() ** 2))
            if off <= tol:
                break
            for i in range(n - 1):
                for j in range(i + 1, n):
                    apq = a[i, j]
                    if apq == 0.0:
                        continue
                    theta = (a[j, j] - a[i, i]) / (2.0 * apq)
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    row_i = a[i, :].copy()
                    row_j = a[j, :].copy()
                    a[i, :] = c * row_i - s * row_j
                    a[j, :] = s * row_i + c * row_j
                    col_i = a[:, i].copy()
                    col_j = a[:, j].copy()
                    a[:, i] = c * col_i - s * col_j
                    a[:, j] = s * col_i + c * col_j
                    a[i, j] = 0.0
                    a[j, i] = 0.0
    return a.diagonal().copy()
