import numpy as np
import pytest

from hvar import assembly, grid, kernels
from hvar.grid import Grid

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_grid():
    """[-1,1]^3 at h = 1/2 with a one-cell collar: 64 interior, 216 nodes."""
    return grid.build_grid(grid.box(1.0), 0.5, R_trunc=8.0, collar=1)


@pytest.fixture(scope="session")
def small_form(small_grid):
    return assembly.assemble_stiffness(small_grid, kernels.fractional_kernel(0.5))


def hand_grid(n_interior, n_exterior=0, N=1):
    """Nodes spread along x with unit volumes; interior first."""
    n = n_interior + n_exterior
    nodes = np.zeros((n, 2 * N + 1))
    nodes[:, 0] = np.arange(n, dtype=float)
    return Grid(nodes, np.ones(n), np.arange(n) < n_interior)
