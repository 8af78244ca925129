"""Backend switch for the compiled kernels.

Set ``SYNDCORR_DISABLE_NUMBA=1`` in the environment to force the pure numpy
implementations, e.g. for debugging or on platforms without numba.
"""

import os

DISABLE_ENV = "SYNDCORR_DISABLE_NUMBA"


def numba_requested() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() not in ("1", "true", "yes", "on")


try:  # pragma: no cover - exercised implicitly
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and numba_requested()


def njit(func):
    """Compile ``func`` with numba when available, else return it unchanged."""
    if HAVE_NUMBA:
        return _numba.njit(cache=True, nogil=True)(func)
    return func
