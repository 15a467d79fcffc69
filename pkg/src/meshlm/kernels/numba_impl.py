"""numba-JIT kernels.

Same function set and semantics as numpy_impl. fastmath stays off so the
compiler cannot reassociate or fuse the accumulations: the matmul family keeps
its fixed left-to-right summation order and is bitwise-identical to the numpy
backend.
"""

import math

import numpy as np
from numba import njit

GELU_C = 0.7978845608028654  # sqrt(2/pi)
GELU_K = 0.044715


# ---------------------------------------------------------------- matmul ---

@njit(cache=True, fastmath=False)
def matmul(a, b):
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=a.dtype)
    for i in range(n):
        for p in range(k):
            aip = a[i, p]
            for j in range(m):
                out[i, j] += aip * b[p, j]
    return out


@njit(cache=True, fastmath=False)
def matmul_tb(a, b):
    n, k = a.shape
    m = b.shape[0]
    out = np.zeros((n, m), dtype=a.dtype)
    for i in range(n):
        for j in range(m):
            s = out[i, j]
            for p in range(k):
                s += a[i, p] * b[j, p]
            out[i, j] = s
    return out


@njit(cache=True, fastmath=False)
def matmul_ta(a, b):
    k, n = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=a.dtype)
    for p in range(k):
        for i in range(n):
            api = a[p, i]
            for j in range(m):
                out[i, j] += api * b[p, j]
    return out


@njit(cache=True, fastmath=False)
def bmm(a, b):
    h = a.shape[0]
    out = np.empty((h, a.shape[1], b.shape[2]), dtype=a.dtype)
    for i in range(h):
        out[i] = matmul(a[i], b[i])
    return out


@njit(cache=True, fastmath=False)
def bmm_tb(a, b):
    h = a.shape[0]
    out = np.empty((h, a.shape[1], b.shape[1]), dtype=a.dtype)
    for i in range(h):
        out[i] = matmul_tb(a[i], b[i])
    return out


@njit(cache=True, fastmath=False)
def bmm_ta(a, b):
    h = a.shape[0]
    out = np.empty((h, a.shape[2], b.shape[2]), dtype=a.dtype)
    for i in range(h):
        out[i] = matmul_ta(a[i], b[i])
    return out


# --------------------------------------------------------------- softmax ---

@njit(cache=True, fastmath=False)
def softmax_rows(x):
    n, m = x.shape
    out = np.empty_like(x)
    for i in range(n):
        mx = x[i, 0]
        for j in range(1, m):
            if x[i, j] > mx:
                mx = x[i, j]
        s = 0.0
        for j in range(m):
            e = math.exp(x[i, j] - mx)
            out[i, j] = e
            s += e
        inv = 1.0 / s
        for j in range(m):
            out[i, j] = out[i, j] * inv
    return out


@njit(cache=True, fastmath=False)
def softmax_bwd(y, dy):
    n, m = y.shape
    out = np.empty_like(y)
    for i in range(n):
        dot = 0.0
        for j in range(m):
            dot += y[i, j] * dy[i, j]
        for j in range(m):
            out[i, j] = y[i, j] * (dy[i, j] - dot)
    return out


# ------------------------------------------------------------- layernorm ---

@njit(cache=True, fastmath=False)
def layernorm_fwd(x, g, b, eps):
    n, d = x.shape
    y = np.empty_like(x)
    mean = np.empty(n, dtype=x.dtype)
    rstd = np.empty(n, dtype=x.dtype)
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += x[i, j]
        mu = acc / d
        acc = 0.0
        for j in range(d):
            dv = x[i, j] - mu
            acc += dv * dv
        rs = 1.0 / math.sqrt(acc / d + eps)
        mean[i] = mu
        rstd[i] = rs
        for j in range(d):
            y[i, j] = (x[i, j] - mu) * rs * g[j] + b[j]
    return y, mean, rstd


@njit(cache=True, fastmath=False)
def layernorm_bwd(x, g, mean, rstd, dy):
    n, d = x.shape
    dx = np.empty_like(x)
    dg = np.zeros(d, dtype=x.dtype)
    db = np.zeros(d, dtype=x.dtype)
    for i in range(n):
        mu = mean[i]
        rs = rstd[i]
        m1 = 0.0
        m2 = 0.0
        for j in range(d):
            xh = (x[i, j] - mu) * rs
            dxh = dy[i, j] * g[j]
            m1 += dxh
            m2 += dxh * xh
            dg[j] += dy[i, j] * xh
            db[j] += dy[i, j]
        m1 /= d
        m2 /= d
        for j in range(d):
            xh = (x[i, j] - mu) * rs
            dx[i, j] = rs * (dy[i, j] * g[j] - m1 - xh * m2)
    return dx, dg, db


# ------------------------------------------------------------------ gelu ---

@njit(cache=True, fastmath=False)
def gelu_fwd(x):
    flat = x.ravel()
    out = np.empty(flat.shape[0], dtype=x.dtype)
    for i in range(flat.shape[0]):
        v = flat[i]
        t = math.tanh(GELU_C * (v + GELU_K * v * v * v))
        out[i] = 0.5 * v * (1.0 + t)
    return out.reshape(x.shape)


@njit(cache=True, fastmath=False)
def gelu_bwd(x, dy):
    flat = x.ravel()
    dflat = dy.ravel()
    out = np.empty(flat.shape[0], dtype=x.dtype)
    for i in range(flat.shape[0]):
        v = flat[i]
        t = math.tanh(GELU_C * (v + GELU_K * v * v * v))
        du = GELU_C * (1.0 + 3.0 * GELU_K * v * v)
        out[i] = dflat[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du)
    return out.reshape(x.shape)


# ---------------------------------------------------------------- rotary ---

@njit(cache=True, fastmath=False)
def rotary(x, cos, sin):
    h, n, d = x.shape
    half = d // 2
    out = np.empty_like(x)
    for a in range(h):
        for i in range(n):
            for j in range(half):
                x1 = x[a, i, j]
                x2 = x[a, i, j + half]
                out[a, i, j] = x1 * cos[i, j] - x2 * sin[i, j]
                out[a, i, j + half] = x1 * sin[i, j] + x2 * cos[i, j]
    return out


# --------------------------------------------------------- cross entropy ---

@njit(cache=True, fastmath=False)
def ce_fwd(logits, targets):
    n, m = logits.shape
    probs = np.empty_like(logits)
    total = 0.0
    for i in range(n):
        mx = logits[i, 0]
        for j in range(1, m):
            if logits[i, j] > mx:
                mx = logits[i, j]
        s = 0.0
        for j in range(m):
            e = math.exp(logits[i, j] - mx)
            probs[i, j] = e
            s += e
        inv = 1.0 / s
        for j in range(m):
            probs[i, j] = probs[i, j] * inv
        total += (math.log(s) + mx) - logits[i, targets[i]]
    return total / n, probs


@njit(cache=True, fastmath=False)
def ce_bwd(probs, targets, gscale):
    n, m = probs.shape
    out = np.empty_like(probs)
    sc = gscale / n
    for i in range(n):
        for j in range(m):
            out[i, j] = probs[i, j] * sc
        out[i, targets[i]] -= sc
    return out


# ----------------------------------------------------------------- adamw ---

@njit(cache=True, fastmath=False)
def adamw_update(p, g, m, v, t, lr, b1, b2, eps, wd):
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for k in range(p.shape[0]):
        gk = np.float64(g[k])
        m[k] = b1 * m[k] + (1.0 - b1) * gk
        v[k] = b2 * v[k] + (1.0 - b2) * gk * gk
        mh = m[k] / bc1
        vh = v[k] / bc2
        pk = np.float64(p[k])
        p[k] = pk - lr * (mh / (math.sqrt(vh) + eps) + wd * pk)


# ------------------------------------------------------------ reductions ---

@njit(cache=True, fastmath=False)
def sumsq(x):
    flat = x.ravel()
    acc = 0.0
    for i in range(flat.shape[0]):
        v = np.float64(flat[i])
        acc += v * v
    return acc


# ---------------------------------------------------------------- jacobi ---

@njit(cache=True, fastmath=False)
def jacobi_eigvals(a_in, rel_tol, max_sweeps):
    n = a_in.shape[0]
    a = a_in.astype(np.float64).copy()
    if n == 1:
        return np.asarray([a[0, 0]])
    fro2 = 0.0
    for i in range(n):
        for j in range(n):
            fro2 += a[i, j] * a[i, j]
    tol = rel_tol * math.sqrt(fro2) if fro2 > 0.0 else 0.0
    for _ in range(max_sweeps):
        off2 = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off2 += a[i, j] * a[i, j]
        if math.sqrt(2.0 * off2) <= tol:
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                apq = a[i, j]
                if apq == 0.0:
                    continue
                theta = (a[j, j] - a[i, i]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    aik = a[i, k]
                    ajk = a[j, k]
                    a[i, k] = c * aik - s * ajk
                    a[j, k] = s * aik + c * ajk
                for k in range(n):
                    aki = a[k, i]
                    akj = a[k, j]
                    a[k, i] = c * aki - s * akj
                    a[k, j] = s * aki + c * akj
                a[i, j] = 0.0
                a[j, i] = 0.0
    w = np.empty(n, dtype=np.float64)
    for i in range(n):
        w[i] = a[i, i]
    return w
