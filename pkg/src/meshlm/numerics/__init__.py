"""Deterministic tensor kernel library with reverse-mode gradients."""

from .tensor import Tensor
from .rng import Rng
from .ops import matmul, softmax_rows, frobenius
from .linalg import singular_values
from .gradcheck import grad_check

__all__ = [
    "Tensor", "Rng", "matmul", "softmax_rows", "frobenius",
    "singular_values", "grad_check",
]
