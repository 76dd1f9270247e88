"""Numba switch.

Setting ``EPSBAI_DISABLE_NUMBA=1`` (or running without numba installed)
makes :func:`njit` the identity, so every kernel runs as plain Python on
the same source. The flag is read once, at import time.
"""
import os

DISABLE_ENV = "EPSBAI_DISABLE_NUMBA"

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _flag_set(value):
    return value.strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = numba is not None and not _flag_set(os.environ.get(DISABLE_ENV, ""))


def njit(fn=None, **options):
    """``numba.njit(cache=True)`` when enabled, otherwise a no-op."""

    def wrap(f):
        if USE_NUMBA:
            return numba.njit(cache=True, **options)(f)
        return f

    if fn is None:
        return wrap
    return wrap(fn)
