"""Numba switch.

Hot kernels are written once in numba-compatible Python and compiled with
``njit`` unless ``QBCHARGE_DISABLE_NUMBA=1`` is set or numba is missing, in
which case the vectorised numpy variants in :mod:`qbcharge.kernels` are used.
"""

import os

_disabled = os.environ.get("QBCHARGE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    _njit = None


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise the identity decorator."""
    if HAS_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend():
    return "numba" if HAS_NUMBA else "numpy"
