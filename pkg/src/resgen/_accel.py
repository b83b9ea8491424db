"""JIT switch for the hot kernels.

Set ``RESGEN_DISABLE_JIT=1`` to force the pure-numpy paths (numba is then
never imported). ``USE_NUMBA`` is read once at import time.
"""
import os

_DISABLE = os.environ.get("RESGEN_DISABLE_JIT", "").strip().lower() in {"1", "true", "yes", "on"}

if _DISABLE:
    HAVE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover
        HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is enabled, else the identity decorator."""
    if HAVE_NUMBA:
        import numba

        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def decorator(func):
        return func

    return decorator
