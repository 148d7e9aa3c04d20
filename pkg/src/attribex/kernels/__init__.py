"""Hot numeric kernels with two interchangeable backends.

The numba backend is used when numba is importable and the ``ATTRIBEX_NUMBA``
environment variable is not set to ``0``; otherwise the pure-numpy backend
runs. ``set_backend`` switches at runtime (used by the benchmark and the
parity tests).
"""
import importlib

from .._jit import HAVE_NUMBA, numba_requested
from ..errors import ConfigError

BACKENDS = ("numba", "numpy")

_backend = "numba" if (HAVE_NUMBA and numba_requested()) else "numpy"
_modules = {}


def get_backend():
    return _backend


def set_backend(name):
    global _backend
    if name not in BACKENDS:
        raise ConfigError(f"unknown backend {name!r}; expected one of {BACKENDS}")
    if name == "numba" and not HAVE_NUMBA:
        raise ConfigError("numba is not installed")
    _backend = name


def _impl():
    mod = _modules.get(_backend)
    if mod is None:
        mod = importlib.import_module(f"._{_backend}", __name__)
        _modules[_backend] = mod
    return mod


def conv2d_forward(x, w, b, stride, pad):
    return _impl().conv2d_forward(x, w, b, stride, pad)


def conv2d_backward_input(g, w, in_shape, stride, pad):
    return _impl().conv2d_backward_input(g, w, tuple(in_shape), stride, pad)


def maxpool_forward(x, size, stride):
    """Returns ``(out, argmax)``; argmax holds flat ``y * W + x`` indices per channel."""
    return _impl().maxpool_forward(x, size, stride)


def maxpool_backward(g, arg, in_shape):
    return _impl().maxpool_backward(g, arg, tuple(in_shape))


def avgpool_forward(x, size, stride):
    return _impl().avgpool_forward(x, size, stride)


def avgpool_backward(g, in_shape, size, stride):
    return _impl().avgpool_backward(g, tuple(in_shape), size, stride)


def shapley_from_values(values, d):
    """Exact Shapley values from a table ``values[mask]`` over all ``2**d`` coalitions."""
    return _impl().shapley_from_values(values, d)


def interaction_from_values(values, d, i, j):
    return _impl().interaction_from_values(values, d, i, j)


def jacobi_eigh(a, tol=1e-14, max_sweeps=100):
    return _impl().jacobi_eigh(a, tol, max_sweeps)
