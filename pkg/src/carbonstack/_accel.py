"""Backend selection for the hot numeric kernels.

Set ``CARBONSTACK_BACKEND=numpy`` to force the pure-numpy code paths even when
numba is importable. Anything else (or unset) selects numba when available.
"""

import os

BACKEND_ENV = "CARBONSTACK_BACKEND"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _requested_backend():
    return os.environ.get(BACKEND_ENV, "numba").strip().lower()


USE_NUMBA = HAVE_NUMBA and _requested_backend() != "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` with caching on; an identity decorator without numba."""
    kwargs.setdefault("cache", True)
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda func: func


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
