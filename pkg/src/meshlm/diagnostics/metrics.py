"""The three pathology observables computed from captured states.

- effort: relative magnitude of a block's state update
- cka_rbf: centered kernel alignment between two stages, RBF kernel
- spectrum: top-50 normalized singular values of a stage

All metrics are computed in f64 regardless of the input dtype. Gram matrices
go through the ordered matmul kernels so that results are deterministic.
"""

import math

import numpy as np

from ..errors import DataError, DegenerateInputError, ShapeError
from ..kernels import impl as K
from ..numerics.linalg import singular_values
from ..numerics.tensor import Tensor

SPECTRUM_TOP = 50
DEFAULT_THETA = 1.0


def _as_array(x, what):
    """Raw f64 array from a Tensor / autodiff Var / ndarray."""
    if isinstance(x, Tensor):
        arr = x.numpy()
    else:
        arr = np.asarray(getattr(x, "data", x))
    if arr.ndim < 1 or arr.ndim > 3:
        raise ShapeError(f"{what} needs rank 1-3, got {arr.ndim}")
    return arr.astype(np.float64, copy=False)


def _as_matrix(x, what):
    arr = _as_array(x, what)
    if arr.ndim != 2:
        raise ShapeError(f"{what} needs rank 2, got {arr.ndim}")
    return arr


def effort(block_input, block_output):
    """2 ||f(h) - h||_F / (||f(h)||_F + ||h||_F), in [0, 2].

    Zero exactly when the block is an identity on this input; 2 when the
    output is antipodal to (or a zero collapse of) the input.
    """
    h = _as_array(block_input, "effort")
    f = _as_array(block_output, "effort")
    if h.shape != f.shape:
        raise ShapeError(f"effort shapes differ: {h.shape} vs {f.shape}")
    norm_h = math.sqrt(K.sumsq(h))
    norm_f = math.sqrt(K.sumsq(f))
    if norm_h == 0.0 and norm_f == 0.0:
        raise DataError("effort undefined for two zero states")
    return 2.0 * math.sqrt(K.sumsq(f - h)) / (norm_f + norm_h)


def _sq_distances(a):
    """Pairwise squared row distances via the Gram matrix."""
    gram = K.matmul_tb(a, a)
    diag = np.diag(gram)
    sq = diag[:, None] + diag[None, :] - 2.0 * gram
    return np.maximum(sq, 0.0)


def _rbf_kernel(a, theta):
    sq = _sq_distances(a)
    iu = np.triu_indices(a.shape[0], k=1)
    median = float(np.median(np.sqrt(sq[iu])))
    if median == 0.0:
        raise DegenerateInputError("all rows identical: zero median distance")
    sigma = theta * median
    return np.exp(-sq / (2.0 * sigma * sigma))


def _centered(k):
    # H K H written out: subtract row/col means, add back the grand mean
    row = k.mean(axis=1, keepdims=True)
    col = k.mean(axis=0, keepdims=True)
    return k - row - col + k.mean()


def cka_rbf(x, y, theta=DEFAULT_THETA):
    """CKA similarity of two stages under an RBF kernel, in [0, 1].

    Bandwidth per side: sigma = theta * median pairwise row distance.
    Biased HSIC estimator; the normalization factors cancel in the ratio.
    """
    a = _as_matrix(x, "cka_rbf")
    b = _as_matrix(y, "cka_rbf")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 3:
        raise ShapeError(f"cka_rbf needs at least 3 rows, got {a.shape[0]}")
    if theta <= 0.0:
        raise DataError(f"theta must be positive, got {theta}")
    kc = _centered(_rbf_kernel(a, theta))
    lc = _centered(_rbf_kernel(b, theta))
    cross = float(np.sum(kc * lc))
    xx = float(np.sum(kc * kc))
    yy = float(np.sum(lc * lc))
    if xx == 0.0 or yy == 0.0:
        raise DegenerateInputError("degenerate kernel: zero HSIC norm")
    # cross / sqrt(xx * yy), factored so identical inputs divide to exactly 1
    return math.copysign(math.sqrt((abs(cross) / xx) * (abs(cross) / yy)),
                         cross)


def spectrum(x):
    """Normalized singular values sigma_i / sigma_0, descending.

    Returns min(50, min(L, D)) values; the leading entry is exactly 1.
    """
    a = _as_matrix(x, "spectrum")
    top = min(SPECTRUM_TOP, min(a.shape))
    sigma = singular_values(a, top)
    if sigma[0] == 0.0:
        raise DegenerateInputError("zero matrix has no spectrum")
    return sigma / sigma[0]
