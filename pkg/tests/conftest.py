import numpy as np
import pytest
from hypothesis import settings

from gsdelab.paths import TimeGrid
from gsdelab.uncertainty import UncertaintySet

settings.register_profile("gsdelab", deadline=None, max_examples=40)
settings.load_profile("gsdelab")


@pytest.fixture
def interval():
    return UncertaintySet.from_interval(0.5, 1.0)


@pytest.fixture
def singleton():
    return UncertaintySet([[[1.0]]])


@pytest.fixture
def unit_grid():
    return TimeGrid(1.0, 16)


def gaussian_expectation(phi, var, n=200):
    """E[phi(Z)] for Z ~ N(0, var) by Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return float(np.sum(w * phi(np.sqrt(var) * x)) / np.sqrt(2.0 * np.pi))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
