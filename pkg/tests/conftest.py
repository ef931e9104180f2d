import numpy as np
import pytest

from filmreduce.geometry import Cylinder, Planar, SphereBand


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CHARTS = {
    "planar": Planar(),
    "cylinder": Cylinder(radius=2.0),
    "sphere": SphereBand(),
}


@pytest.fixture(params=sorted(CHARTS))
def chart(request):
    return CHARTS[request.param]


def random_points(chart, rng, n):
    (a1, b1), (a2, b2) = chart.domain
    return rng.uniform(a1, b1, n), rng.uniform(a2, b2, n)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
