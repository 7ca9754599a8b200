import math

import numpy as np
import pytest

from lfgs._kernels import _pycore

try:
    from lfgs._kernels import _core
except ImportError:  # extension not built
    _core = None

BACKENDS = [pytest.param(_pycore, id="python")]
if _core is not None:
    BACKENDS.append(pytest.param(_core, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def circle_point(theta):
    return np.array([[math.cos(theta)], [math.sin(theta)]])


def random_skew(rng, k, scale=1.0):
    a = rng.standard_normal((k, k))
    a = a - a.T
    return scale * a / np.linalg.norm(a, 2)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
