"""Backend switch for the numeric kernels.

Kernels are written in the numpy subset numba understands. When numba is
importable and ``AIC_DISABLE_NUMBA`` is unset (or ``0``), they are compiled
with ``@njit``; otherwise the same source runs as plain numpy.
"""
import os

_flag = os.environ.get("AIC_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:
    _njit = None
    NUMBA_ENABLED = False

BACKEND = "numba" if NUMBA_ENABLED else "numpy"


def jit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if NUMBA_ENABLED:
        return _njit(cache=True, nogil=True)(func)
    return func
