import numpy as np
import pytest

from tdtli.core import ClusterSpecies, talbot_time
from tdtli.ensemble import BeamEnsemble, GaussianDist


@pytest.fixture
def heptamer():
    return ClusterSpecies(7, 1247.6, 0.0, 0.0)


@pytest.fixture
def gauss_beam():
    return BeamEnsemble(925.0, transverse=GaussianDist(0.0, 0.62))


@pytest.fixture
def talbot_heptamer(heptamer):
    return talbot_time(heptamer.mass)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    lines = [line for name, mod in list(sys.modules.items())
             if name.endswith("test_acceptance") for line in getattr(mod, "LINES", [])]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
