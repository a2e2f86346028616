"""
conftest.py - Shared fixtures: small shapes, grids, solved modes, and analytic states
"""

import numpy as np
import pytest

from geometry import OvalShape, Grid2D, covering_grid
from helmholtz import solve_modes
from synthetic import gaussian_mode, oscillator_product_mode
from wigner import MomentumGrid, support_widths


@pytest.fixture(scope="session")
def ellipse():
    return OvalShape(1.2, 1.0, 0.0)


@pytest.fixture(scope="session")
def oval():
    return OvalShape(1.2, 1.0, 0.3)


@pytest.fixture(scope="session")
def ellipse_modes(ellipse):
    """Lowest six modes of the 1.2 x 1.0 ellipse at h = 1/32."""
    grid = covering_grid(ellipse, 1.0 / 32)
    return solve_modes(ellipse, grid, 6)


@pytest.fixture(scope="session")
def state_grid():
    """Fine mode grid for the analytic oscillator states."""
    return Grid2D.symmetric(6.0, 6.0, 0.05, pad=0)


@pytest.fixture(scope="session")
def sample_positions():
    """17 x 17 Wigner position nodes on [-4, 4]^2, origin included."""
    return Grid2D.spanning(-4.0, 4.0, -4.0, 4.0, 17, 17)


@pytest.fixture(scope="session")
def gaussian(state_grid):
    return gaussian_mode(state_grid)


@pytest.fixture(scope="session")
def product_state(state_grid):
    return oscillator_product_mode(state_grid)


@pytest.fixture(scope="session")
def state_momentum(gaussian):
    """|p| <= 6 with displacements covering the whole state grid."""
    wx, wy = support_widths(gaussian)
    return MomentumGrid.for_extent(6.0, wx, wy, 48)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
