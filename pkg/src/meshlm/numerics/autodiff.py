"""Reverse-mode automatic differentiation over numpy arrays.

Var wraps an ndarray and remembers how it was produced; backward() walks the
graph in reverse topological order calling each node's vjp closure. Ops are
composite-granularity (layernorm, softmax, cross-entropy each have one
hand-derived backward) and call into the kernel backend for the heavy math.

Vars built from constants (requires_grad=False, no differentiable parents)
carry no graph, so running a model on frozen weights costs nothing extra.
"""

import numpy as np

from ..errors import ShapeError
from ..kernels import impl as K


class Var:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Var(shape={self.data.shape}, grad={self.requires_grad})"


def _make(data, parents, vjp):
    out = Var(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def _acc(p, g):
    if not p.requires_grad:
        return
    if p.grad is None:
        p.grad = g.astype(p.data.dtype, copy=True)
    else:
        p.grad += g


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def backward(root):
    """Accumulate d(root)/d(leaf) into .grad over the whole graph."""
    if root.data.size != 1:
        raise ShapeError("backward root must be a scalar")
    topo = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad:
                stack.append((p, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._vjp is not None:
            node._vjp(node.grad)


def zero_grads(params):
    """Clear .grad on every Var in a dict or iterable of Vars."""
    vals = params.values() if isinstance(params, dict) else params
    for p in vals:
        p.grad = None


# ------------------------------------------------------------ elementwise ---

def add(a, b):
    data = a.data + b.data

    def vjp(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(g, b.data.shape))
    return _make(data, (a, b), vjp)


def sub(a, b):
    data = a.data - b.data

    def vjp(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, -_unbroadcast(g, b.data.shape))
    return _make(data, (a, b), vjp)


def mul(a, b):
    data = a.data * b.data

    def vjp(g):
        _acc(a, _unbroadcast(g * b.data, a.data.shape))
        _acc(b, _unbroadcast(g * a.data, b.data.shape))
    return _make(data, (a, b), vjp)


def cmul(a, c):
    """Multiply by a python-float constant."""
    c = float(c)
    data = a.data * np.asarray(c, dtype=a.data.dtype)

    def vjp(g):
        _acc(a, g * np.asarray(c, dtype=a.data.dtype))
    return _make(data, (a,), vjp)


def cadd(a, const):
    """Add a constant ndarray (no gradient into the constant)."""
    data = a.data + const

    def vjp(g):
        _acc(a, _unbroadcast(g, a.data.shape))
    return _make(data, (a,), vjp)


# ----------------------------------------------------------------- matmul ---

def matmul(a, b):
    data = K.matmul(a.data, b.data)

    def vjp(g):
        g = np.ascontiguousarray(g)
        _acc(a, K.matmul(g, np.ascontiguousarray(b.data.T)))
        _acc(b, K.matmul(np.ascontiguousarray(a.data.T), g))
    return _make(data, (a, b), vjp)


def matmul_tb(a, b):
    """a @ b.T (used for the tied output head)."""
    data = K.matmul_tb(a.data, b.data)

    def vjp(g):
        g = np.ascontiguousarray(g)
        _acc(a, K.matmul(g, b.data))
        _acc(b, K.matmul(np.ascontiguousarray(g.T), a.data))
    return _make(data, (a, b), vjp)


def bmm(a, b):
    data = K.bmm(a.data, b.data)

    def vjp(g):
        g = np.ascontiguousarray(g)
        _acc(a, K.bmm(g, np.ascontiguousarray(b.data.transpose(0, 2, 1))))
        _acc(b, K.bmm(np.ascontiguousarray(a.data.transpose(0, 2, 1)), g))
    return _make(data, (a, b), vjp)


def bmm_tb(a, b):
    """Per-batch a[h] @ b[h].T (attention scores)."""
    data = K.bmm_tb(a.data, b.data)

    def vjp(g):
        g = np.ascontiguousarray(g)
        _acc(a, K.bmm(g, b.data))
        _acc(b, K.bmm(np.ascontiguousarray(g.transpose(0, 2, 1)), a.data))
    return _make(data, (a, b), vjp)


# ---------------------------------------------------------------- reshape ---

def split_heads(x, n_heads):
    """(L, D) -> (H, L, D/H)."""
    n, d = x.data.shape
    dh = d // n_heads
    data = np.ascontiguousarray(x.data.reshape(n, n_heads, dh).transpose(1, 0, 2))

    def vjp(g):
        _acc(x, np.ascontiguousarray(g.transpose(1, 0, 2)).reshape(n, d))
    return _make(data, (x,), vjp)


def merge_heads(x):
    """(H, L, dh) -> (L, H*dh)."""
    h, n, dh = x.data.shape
    data = np.ascontiguousarray(x.data.transpose(1, 0, 2)).reshape(n, h * dh)

    def vjp(g):
        _acc(x, np.ascontiguousarray(g.reshape(n, h, dh).transpose(1, 0, 2)))
    return _make(data, (x,), vjp)


def slice_col(x, j):
    """Column j of a 2-D Var, kept as (L, 1)."""
    data = x.data[:, j:j + 1].copy()

    def vjp(g):
        full = np.zeros_like(x.data)
        full[:, j:j + 1] = g
        _acc(x, full)
    return _make(data, (x,), vjp)


# -------------------------------------------------------------- composite ---

def softmax_rows(x):
    """Softmax along the last axis of a 2-D or 3-D Var."""
    flat = x.data.reshape(-1, x.data.shape[-1])
    y = K.softmax_rows(np.ascontiguousarray(flat)).reshape(x.data.shape)

    def vjp(g):
        gy = np.ascontiguousarray(g.reshape(-1, g.shape[-1]))
        yy = np.ascontiguousarray(y.reshape(-1, y.shape[-1]))
        _acc(x, K.softmax_bwd(yy, gy).reshape(x.data.shape))
    return _make(y, (x,), vjp)


def layernorm(x, g_param, b_param, eps=1e-5):
    y, mean, rstd = K.layernorm_fwd(x.data, g_param.data, b_param.data, eps)

    def vjp(g):
        dx, dg, db = K.layernorm_bwd(x.data, g_param.data, mean, rstd,
                                     np.ascontiguousarray(g))
        _acc(x, dx)
        _acc(g_param, dg)
        _acc(b_param, db)
    return _make(y, (x, g_param, b_param), vjp)


def gelu(x):
    y = K.gelu_fwd(x.data)

    def vjp(g):
        _acc(x, K.gelu_bwd(x.data, np.ascontiguousarray(g)))
    return _make(y, (x,), vjp)


def rotary(x, cos, sin):
    """Rotate-half position encoding; cos/sin are constant tables."""
    y = K.rotary(x.data, cos, sin)
    neg_sin = -sin

    def vjp(g):
        _acc(x, K.rotary(np.ascontiguousarray(g), cos, neg_sin))
    return _make(y, (x,), vjp)


def embedding(table, ids):
    """Gather rows of `table` (a Var) at integer positions `ids`."""
    data = table.data[ids].copy()

    def vjp(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        _acc(table, full)
    return _make(data, (table,), vjp)


def cross_entropy(logits, targets):
    """Mean cross entropy (nats) over rows; returns a shape-(1,) f64 Var."""
    loss, probs = K.ce_fwd(logits.data, targets)

    def vjp(g):
        _acc(logits, K.ce_bwd(probs, targets, float(g.reshape(-1)[0])))
    return _make(np.array([loss], dtype=np.float64), (logits,), vjp)


def lincomb3(coefs, x1, x2, x3):
    """c0*x1 + c1*x2 + c2*x3 with a trainable 3-vector of coefficients."""
    c = coefs.data.reshape(-1)
    if c.shape[0] != 3:
        raise ShapeError(f"lincomb3 needs 3 coefficients, got {c.shape[0]}")
    data = c[0] * x1.data + c[1] * x2.data + c[2] * x3.data
    parts = (x1, x2, x3)

    def vjp(g):
        dc = np.array([np.sum(g * p.data, dtype=np.float64) for p in parts],
                      dtype=np.float64)
        _acc(coefs, dc.reshape(coefs.data.shape).astype(coefs.data.dtype))
        for ci, p in zip(c, parts):
            _acc(p, g * ci)
    return _make(data, (coefs, x1, x2, x3), vjp)


def mean_rows(x):
    """(L, D) -> (1, D) mean over rows."""
    n = x.data.shape[0]
    data = x.data.mean(axis=0, keepdims=True)

    def vjp(g):
        _acc(x, np.repeat(g / n, n, axis=0).astype(x.data.dtype))
    return _make(data, (x,), vjp)


def sumall(x):
    """Sum of every entry as a shape-(1,) f64 Var (a backward root)."""
    data = np.array([np.sum(x.data, dtype=np.float64)])

    def vjp(g):
        _acc(x, np.full_like(x.data, float(g.reshape(-1)[0])))
    return _make(data, (x,), vjp)
