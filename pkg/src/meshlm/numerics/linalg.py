"""Singular values via a Gram-matrix Jacobi eigensolve.

Only the values are needed (never the vectors), so we eigensolve the smaller
of X.T X / X X.T with cyclic Jacobi and take square roots. The Gram matrix is
built with the ordered matmul kernels, keeping everything deterministic.
"""

import math

import numpy as np

from ..errors import ShapeError
from ..kernels import impl as K
from .tensor import Tensor

JACOBI_REL_TOL = 1e-10
JACOBI_MAX_SWEEPS = 60


def singular_values(x, top_k):
    """Top `top_k` singular values of a rank-2 tensor, descending, f64."""
    arr = x.numpy() if isinstance(x, Tensor) else np.asarray(x)
    if arr.ndim != 2:
        raise ShapeError(f"singular_values needs rank 2, got {arr.ndim}")
    n_rows, n_cols = arr.shape
    small = min(n_rows, n_cols)
    if not (1 <= top_k <= small):
        raise ShapeError(f"top_k={top_k} out of range [1, {small}]")
    a = arr.astype(np.float64, copy=False)
    if n_cols <= n_rows:
        gram = K.matmul_ta(a, a)  # X.T X, cols x cols
    else:
        gram = K.matmul_tb(a, a)  # X X.T, rows x rows
    w = K.jacobi_eigvals(gram, JACOBI_REL_TOL, JACOBI_MAX_SWEEPS)
    # eigenvalues below the solver's stopping resolution are noise from
    # squaring into the Gram matrix; report them as exactly zero
    floor = JACOBI_REL_TOL * math.sqrt(K.sumsq(gram))
    w = np.where(w > floor, w, 0.0)
    sigma = np.sqrt(np.sort(w)[::-1])
    return sigma[:top_k].copy()
