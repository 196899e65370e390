"""
Shared fixtures for the necklace test suite.
"""

import math

import numpy as np
import pytest

from src.coupled_modes import ModeStack
from src.graph_core import Family, Geometry, GraphGrid

# coarse lattice that keeps the pure-Python shooter fast
COARSE_SPP = 20


@pytest.fixture
def geometry_pi() -> Geometry:
    """Necklace with L = pi (P = 2 pi)"""
    return Geometry(1)


@pytest.fixture
def geometry_3pi() -> Geometry:
    return Geometry(3)


@pytest.fixture
def small_grid(geometry_pi: Geometry) -> GraphGrid:
    """Three cells at dx = pi/8"""
    return GraphGrid.for_cells(geometry_pi, -1, 1, 8)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def sech_stack(eps: float, m_max: int = 1, samples_per_pi: int = COARSE_SPP, cells: int | None = None) -> ModeStack:
    """Analytic stand-in for a coupled-mode solution: u_1 = sqrt(2/3) eps sech(eps (x - x0))"""
    geometry = Geometry(1)
    cells = cells or math.ceil(20.0 / (eps * geometry.P))
    grid = GraphGrid.for_cells(geometry, -cells, cells, samples_per_pi)
    x0 = geometry.symmetry_point(Family.LINK_CENTERED)
    values = np.zeros(((m_max + 1) // 2, grid.n_nodes))
    values[0] = math.sqrt(2.0 / 3.0) * eps / np.cosh(eps * (grid.x - x0))
    values[0, [0, -1]] = 0.0
    return ModeStack(grid, values, eps, 1, Family.LINK_CENTERED)


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "out"
    path.mkdir()
    return path
