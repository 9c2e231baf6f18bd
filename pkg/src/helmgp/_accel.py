"""Numba switch.

Hot loops are written once and compiled with ``numba.njit`` unless the
environment variable ``HELMGP_DISABLE_NUMBA`` is set to a truthy value (or
numba is not importable), in which case callers fall back to the pure
numpy implementations living next to each kernel.
"""
import os

_FLAG = os.environ.get("HELMGP_DISABLE_NUMBA", "").strip().lower()

try:
    if _FLAG in ("1", "true", "yes", "on"):
        raise ImportError("numba disabled by HELMGP_DISABLE_NUMBA")
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def use_numba():
    return HAVE_NUMBA
