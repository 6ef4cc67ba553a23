import warnings

import numpy as np
import pytest

from osrc_efie.mesh import build_edge_topology, sphere_mesh
from osrc_efie.spaces import build_space

warnings.filterwarnings("ignore", message=".*TBB threading layer")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


class Discretization:
    def __init__(self, frequency, radius=1.0):
        self.mesh = sphere_mesh(radius, frequency)
        self.topo = build_edge_topology(self.mesh)
        self.rwg = build_space(self.mesh, self.topo, "RWG")
        self.snc = build_space(self.mesh, self.topo, "SNC")
        self.p1 = build_space(self.mesh, self.topo, "P1")


@pytest.fixture(scope="session")
def ico():
    return Discretization(1)


@pytest.fixture(scope="session")
def sphere2():
    return Discretization(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
