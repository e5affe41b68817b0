"""Numba acceleration toggle.

Hot kernels (the one-at-a-time coordinate sweep, lasso coordinate descent,
the exact KDE) are compiled with numba unless the environment variable
``PROBE_NUMBA=0`` is set or numba is unavailable, in which case the same
source runs as plain numpy/python.
"""

import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

NUMBA_ENABLED = _HAVE_NUMBA and os.environ.get("PROBE_NUMBA", "1") != "0"


def maybe_njit(func=None, **kwargs):
    """Apply ``numba.njit`` when acceleration is enabled, else return func."""

    def wrap(f):
        if NUMBA_ENABLED:
            return numba.njit(**kwargs)(f)
        return f

    if func is None:
        return wrap
    return wrap(func)
