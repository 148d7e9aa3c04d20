import numpy as np
import pytest

from attribex import kernels
from attribex.runtime import Dense, Network, ReLU, run


def linear_net(w, b=None):
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    return Network((Dense(w, None if b is None else np.atleast_1d(b)),), (w.shape[1],))


def min_preactivation(net, x):
    """Smallest |input| to any ReLU along the forward pass at x."""
    trace = run(net, x)
    mins = [np.min(np.abs(trace[i])) for i, layer in enumerate(net.layers) if isinstance(layer, ReLU)]
    return min(mins) if mins else np.inf


def rel_err(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / max(np.max(np.abs(b)), 1e-300))


@pytest.fixture(params=[b for b in kernels.BACKENDS if b != "numba" or kernels.HAVE_NUMBA])
def backend(request):
    before = kernels.get_backend()
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(before)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
