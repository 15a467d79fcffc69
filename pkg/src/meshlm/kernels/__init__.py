"""Kernel dispatch.

`impl` is the module of kernel functions selected at import time (see
meshlm.backend). Both implementations expose the same function set with
identical semantics; the matmul family is bitwise-identical across backends
(same fixed summation order), transcendental kernels agree to ~1 ulp.
"""

from .. import backend

ACTIVE = backend.select_backend()

if ACTIVE == "numba":
    from . import numba_impl as impl
else:
    from . import numpy_impl as impl


def active():
    """Name of the backend actually in use: 'numba' or 'numpy'."""
    return ACTIVE
