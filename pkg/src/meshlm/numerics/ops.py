"""Public tensor operations.

Thin validating wrappers over the kernel backend. Summation order in matmul
is fixed left-to-right over the inner dimension on both backends.
"""

import math

import numpy as np

from ..errors import NumericalError, ShapeError
from ..kernels import impl as K
from .tensor import Tensor


def matmul(a, b):
    """Matrix product of two rank-2 tensors with deterministic summation."""
    if a.rank != 2 or b.rank != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a.rank} and {b.rank}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dims differ: {a.shape} x {b.shape}")
    if a.dtype != b.dtype:
        raise ShapeError(f"dtype mismatch: {a.dtype} vs {b.dtype}")
    return Tensor(K.matmul(a.numpy(), b.numpy()))


def softmax_rows(x):
    """Row-wise softmax of a rank-2 tensor, max-subtracted for stability."""
    if x.rank != 2:
        raise ShapeError(f"softmax_rows needs rank 2, got {x.rank}")
    out = K.softmax_rows(x.numpy())
    if not np.all(np.isfinite(out)):
        raise NumericalError("softmax produced non-finite values")
    return Tensor(out)


def frobenius(x):
    """Frobenius norm: sqrt of the sum of squares of all entries."""
    return math.sqrt(K.sumsq(x.numpy()))
