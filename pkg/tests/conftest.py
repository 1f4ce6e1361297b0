import numpy as np
import pytest

from cdrpost.spatial import ArrayGeometry, chime_front5


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def front5():
    return chime_front5()


@pytest.fixture(scope="session")
def pair_geometry():
    """Two mics 0.1 m apart on the x axis, symmetric about the origin."""
    return ArrayGeometry(np.array([[-0.05, 0.0, 0.0], [0.05, 0.0, 0.0]]))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
