"""Kernel backend selection: numba JIT loops or pure-numpy fallback.

Hot numeric kernels ship in two flavors, `kernels.numba_impl` (loop kernels
under ``@njit``) and `kernels.numpy_impl` (vectorized numpy). The backend is
picked once at import time: set ``HYBRIDEVAL_DISABLE_NUMBA=1`` to force the
numpy path; it is also taken automatically when numba is not installed.
"""

from __future__ import annotations

import os

DISABLE_ENV = "HYBRIDEVAL_DISABLE_NUMBA"

_TRUTHY = {"1", "true", "yes", "on"}


def _detect() -> bool:
    if os.environ.get(DISABLE_ENV, "").strip().lower() in _TRUTHY:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USING_NUMBA = _detect()


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
