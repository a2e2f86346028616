"""
test_wigner.py - Wigner transform against closed forms, slices, marginals, purity
"""

import math

import numpy as np
import pytest

from errors import ResolutionError, ValidationError, EmptyInteriorError
from geometry import Grid2D
from helmholtz import EigenMode
from synthetic import gaussian_wigner, PRODUCT_WIGNER_ORIGIN
from wigner import (MomentumGrid, wigner_transform, wigner_slice, marginals, normalization,
                    purity, inversion_asymmetry, radial_profile, default_positions,
                    position_density, position_quadrature)


@pytest.fixture(scope="module")
def gaussian_field(gaussian, state_momentum, sample_positions):
    return wigner_transform(gaussian, state_momentum, sample_positions)


# -----------------------------------------------------------------------------
# Momentum grid
# -----------------------------------------------------------------------------
def test_momentum_grid_is_conjugate():
    m = MomentumGrid(16, 8, 0.5, 0.25)
    assert m.ds_x * m.dp_x * m.np_x == pytest.approx(2 * math.pi)
    assert m.px[m.np_x // 2] == 0.0 and m.sy[m.np_y // 2] == 0.0
    assert m.px[0] == pytest.approx(-8 * 0.5)


def test_momentum_grid_rejects_odd_counts():
    with pytest.raises(ValidationError):
        MomentumGrid(15, 16, 0.5, 0.5)


def test_for_extent_raises_count_to_cover_support():
    m = MomentumGrid.for_extent(6.0, 30.0, 2.0, 48)
    assert m.np_x % 2 == 0 and m.np_x * m.ds_x >= 60.0
    assert m.np_y == 48
    assert m.px[0] == pytest.approx(-6.0)


# -----------------------------------------------------------------------------
# Transform
# -----------------------------------------------------------------------------
def test_gaussian_matches_closed_form(gaussian_field, state_momentum, sample_positions):
    exact = gaussian_wigner(sample_positions, state_momentum).values
    np.testing.assert_allclose(gaussian_field.values, exact, atol=5e-4)
    assert gaussian_field.values.min() > -1e-4


def test_product_state_origin_value(product_state, state_momentum, sample_positions):
    W = wigner_transform(product_state, state_momentum, sample_positions)
    origin = W.values[8, 8, state_momentum.np_x // 2, state_momentum.np_y // 2]
    assert origin == pytest.approx(PRODUCT_WIGNER_ORIGIN, abs=5e-4)


def test_field_is_normalized_and_inversion_symmetric(gaussian_field):
    assert normalization(gaussian_field) == pytest.approx(1.0, abs=1e-12)
    assert inversion_asymmetry(gaussian_field) == 0.0
    assert gaussian_field.drift < 1e-6


def test_position_marginal_is_density(product_state, state_momentum, sample_positions):
    W = wigner_transform(product_state, state_momentum, sample_positions)
    position, _ = marginals(W)
    X, Y = sample_positions.mesh()
    density = (2 / math.pi) * X ** 2 * np.exp(-(X ** 2 + Y ** 2))
    np.testing.assert_allclose(position, density, atol=1e-6)
    np.testing.assert_allclose(position, position_density(product_state, sample_positions), atol=1e-12)
    assert position.min() >= -1e-9


def test_gaussian_momentum_marginal(gaussian_field, state_momentum):
    _, momentum = marginals(gaussian_field)
    PX, PY = np.meshgrid(state_momentum.px, state_momentum.py, indexing='ij')
    np.testing.assert_allclose(momentum, np.exp(-(PX ** 2 + PY ** 2)) / math.pi, atol=1e-4)
    assert np.sum(momentum) * state_momentum.cell_area == pytest.approx(1.0, abs=1e-9)


def test_gaussian_purity(gaussian_field):
    assert purity(gaussian_field) == pytest.approx(1.0, abs=1e-3)


def test_quadrature_does_not_depend_on_momentum_count(gaussian, sample_positions):
    coarse = MomentumGrid.for_mode(gaussian, 48, 6.0)
    fine = MomentumGrid.for_mode(gaussian, 96, 6.0)
    W1 = wigner_transform(gaussian, coarse, sample_positions)
    W2 = wigner_transform(gaussian, fine, sample_positions)
    assert W1.quadrature == W2.quadrature == position_quadrature(gaussian, sample_positions)
    assert W1.drift < 1e-12 and W2.drift < 1e-12


def test_quadrature_rescales_an_unnormalized_mode(gaussian, state_momentum, sample_positions):
    scaled = EigenMode(gaussian.k, 1.002 * gaussian.psi, gaussian.grid)
    W = wigner_transform(scaled, state_momentum, sample_positions)
    assert W.quadrature == pytest.approx(1.002 ** 2, rel=1e-9)
    assert normalization(W) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ResolutionError):
        wigner_transform(scaled, state_momentum, sample_positions, quadrature_limit=1e-3)


def test_coarse_positions_abort(gaussian, state_momentum):
    coarse = Grid2D.spanning(-4.0, 4.0, -4.0, 4.0, 5, 5)
    with pytest.raises(ResolutionError):
        wigner_transform(gaussian, state_momentum, coarse)


def test_short_displacement_window_aborts(gaussian, sample_positions):
    with pytest.raises(ResolutionError):
        wigner_transform(gaussian, MomentumGrid(8, 8, 1.0, 1.0), sample_positions)


def test_row_blocks_in_parallel_match_serial(product_state, state_momentum, sample_positions):
    serial = wigner_transform(product_state, state_momentum, sample_positions)
    threaded = wigner_transform(product_state, state_momentum, sample_positions, workers=3)
    assert np.array_equal(serial.values, threaded.values)


# -----------------------------------------------------------------------------
# Slices
# -----------------------------------------------------------------------------
def test_slices_match_full_field(gaussian, gaussian_field, state_momentum, sample_positions):
    raw = gaussian_field.values * gaussian_field.quadrature
    cx, cy = state_momentum.np_x // 2, state_momentum.np_y // 2
    sx = wigner_slice(gaussian, 'X', momentum=state_momentum, coords=sample_positions.x)
    sy = wigner_slice(gaussian, 'Y', momentum=state_momentum, coords=sample_positions.y)
    np.testing.assert_allclose(sx.values, raw[:, 8, :, cy], atol=1e-8)
    np.testing.assert_allclose(sy.values, raw[8, :, cx, :], atol=1e-8)


def test_gaussian_slice_is_separable(gaussian, state_momentum, sample_positions):
    s = wigner_slice(gaussian, 'X', momentum=state_momentum, coords=sample_positions.x)
    X, P = np.meshgrid(s.coords, s.momenta, indexing='ij')
    np.testing.assert_allclose(s.values, np.exp(-X ** 2 - P ** 2) / math.pi ** 2, atol=5e-4)


def test_even_mode_slice_is_symmetric(ellipse_modes):
    s = wigner_slice(ellipse_modes[0], 'X', 64)
    np.testing.assert_allclose(s.values, s.values[::-1, :], atol=1e-7 * np.abs(s.values).max())


def test_slice_axis_validation(gaussian):
    with pytest.raises(ValidationError):
        wigner_slice(gaussian, 'Z', 32)


def test_cut_outside_the_mode_grid():
    grid = Grid2D(0.0, 1.0, 0.1, 0.1, 11, 11)
    X, Y = grid.mesh()
    mode = EigenMode(1.0, np.sin(np.pi * X) * np.sin(np.pi * (Y - 1.0)), grid)
    with pytest.raises(EmptyInteriorError):
        wigner_slice(mode, 'X', 16, momentum=MomentumGrid(16, 16, 2.0, 2.0))


# -----------------------------------------------------------------------------
# Billiard modes
# -----------------------------------------------------------------------------
@pytest.fixture(scope="module")
def billiard_field(ellipse_modes):
    mode = ellipse_modes[5]
    momentum = MomentumGrid.for_mode(mode, 48)
    return mode, wigner_transform(mode, momentum, default_positions(mode, 40), quadrature_limit=0.05)


@pytest.mark.slow
def test_billiard_momentum_concentrates_near_k(billiard_field):
    mode, W = billiard_field
    _, density = marginals(W)
    radii, profile = radial_profile(density, W.momentum, bins=48)
    peak = radii[int(np.argmax(profile))]
    assert peak == pytest.approx(mode.k, rel=0.15)


@pytest.mark.slow
def test_billiard_purity(billiard_field):
    _, W = billiard_field
    assert purity(W) == pytest.approx(1.0, rel=0.02)
    assert inversion_asymmetry(W) == 0.0


@pytest.mark.slow
def test_billiard_marginal_and_normalization(billiard_field):
    mode, W = billiard_field
    position, _ = marginals(W)
    np.testing.assert_allclose(position, position_density(mode, W.positions), atol=1e-6)
    assert normalization(W) == pytest.approx(1.0, abs=1e-6)
    assert W.drift < 1e-4
