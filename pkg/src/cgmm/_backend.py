"""Select the numba or pure-numpy kernel backend.

Set ``CGMM_DISABLE_NUMBA=1`` to force the numpy path (numba is also skipped
automatically when it cannot be imported).
"""

import os
import warnings

_DISABLED = os.environ.get("CGMM_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by CGMM_DISABLE_NUMBA")
    import numba
    HAS_NUMBA = True
    # numba falls back to another threading layer on its own
    warnings.filterwarnings("ignore", message="The TBB threading layer")
except ImportError:
    numba = None
    HAS_NUMBA = False

JIT_OPTIONS = dict(cache=True, nogil=True, fastmath=False, error_model="numpy")


def njit(parallel=False):
    """Compile with numba when available, otherwise return the function unchanged."""

    def wrap(func):
        if not HAS_NUMBA:
            return func
        return numba.njit(parallel=parallel, **JIT_OPTIONS)(func)

    return wrap


def set_threads(n: int | None) -> int:
    """Set the kernel thread count (``None`` or 0 means all available); returns the value used."""
    if not HAS_NUMBA:
        return 1
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if not n else max(1, min(int(n), limit))
    numba.set_num_threads(n)
    return n
