"""Dense row-major tensors of rank 1 to 3.

Tensor is the value type of the public numerics API: immutable, f32 or f64,
finite everywhere. Internal code (autodiff, kernels) works on raw numpy
arrays; Tensor is the boundary where the invariants are enforced.
"""

import numpy as np

from ..errors import NumericalError, ShapeError

_DTYPES = {
    "f32": np.float32,
    "f64": np.float64,
}
_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64"}


class Tensor:
    """Immutable dense array, rank 1-3, float32 or float64."""

    __slots__ = ("_data",)

    def __init__(self, data, dtype=None):
        if dtype is not None and dtype not in _DTYPES:
            raise ShapeError(f"dtype must be 'f32' or 'f64', got {dtype!r}")
        arr = np.array(data, dtype=_DTYPES[dtype] if dtype else None, order="C")
        if arr.dtype not in _NAMES:
            if np.issubdtype(arr.dtype, np.integer):
                arr = arr.astype(np.float64)
            else:
                raise ShapeError(f"unsupported dtype {arr.dtype}")
        if arr.ndim < 1 or arr.ndim > 3:
            raise ShapeError(f"rank must be 1-3, got {arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise NumericalError("tensor contains NaN/Inf")
        arr.flags.writeable = False
        self._data = arr

    # -- construction helpers ------------------------------------------------

    @classmethod
    def zeros(cls, shape, dtype="f64"):
        return cls(np.zeros(shape, dtype=_DTYPES[dtype]))

    @classmethod
    def from_numpy(cls, arr):
        return cls(arr)

    # -- views ---------------------------------------------------------------

    @property
    def shape(self):
        return self._data.shape

    @property
    def dtype(self):
        """Dtype name: 'f32' or 'f64'."""
        return _NAMES[self._data.dtype]

    @property
    def rank(self):
        return self._data.ndim

    def numpy(self):
        """Read-only numpy view of the underlying buffer."""
        return self._data

    def tolist(self):
        return self._data.tolist()

    def item(self):
        return float(self._data.reshape(-1)[0])

    def __len__(self):
        return self._data.shape[0]

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype})"

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (self._data.shape == other._data.shape
                and self._data.dtype == other._data.dtype
                and bool(np.array_equal(self._data, other._data)))


def np_dtype(name):
    """Map 'f32'/'f64' to the numpy dtype."""
    try:
        return _DTYPES[name]
    except KeyError:
        raise ShapeError(f"dtype must be 'f32' or 'f64', got {name!r}") from None
