"""Kernel backend selection.

Two interchangeable kernel implementations exist: a numba-JIT one and a pure
numpy one. The env var MESHLM_BACKEND picks between them:

    MESHLM_BACKEND=numba   force numba (error if it is not installed)
    MESHLM_BACKEND=numpy   force the pure numpy fallback
    unset / auto           numba when importable, else numpy

Selection happens once at import time; the benchmark script imports both
implementations directly instead of flipping the env var.
"""

import os

from .errors import ConfigError

try:
    import numba  # noqa: F401
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def select_backend():
    """Return 'numba' or 'numpy' according to env + availability."""
    choice = os.environ.get("MESHLM_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "numba" if HAS_NUMBA else "numpy"
    if choice == "numba":
        if not HAS_NUMBA:
            raise ImportError(
                "MESHLM_BACKEND=numba but numba is not installed "
                "(pip install meshlm[numba])")
        return "numba"
    if choice == "numpy":
        return "numpy"
    raise ConfigError(f"unknown MESHLM_BACKEND value: {choice!r}")
