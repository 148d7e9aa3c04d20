import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_FALSY = {"0", "false", "no", "off", ""}


def numba_requested():
    """True unless ``ATTRIBEX_NUMBA`` is set to a falsy value."""
    return os.environ.get("ATTRIBEX_NUMBA", "1").strip().lower() not in _FALSY


def njit(*args, **kwargs):
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
