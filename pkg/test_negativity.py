"""
test_negativity.py - Complex entropy, negative volume, and channel decomposition
"""

import math

import numpy as np
import pytest

from errors import DegenerateChannelError
from geometry import Grid2D
from negativity import (complex_entropy, negative_volume, negative_volume_from_abs,
                        split_channels)
from synthetic import (SyntheticField, gaussian_wigner, product_wigner, phase_space_grids,
                       GAUSSIAN_H_R, PRODUCT_NEGATIVE_VOLUME, PRODUCT_H_I)
from wigner import wigner_transform


@pytest.fixture(scope="module")
def grids():
    return phase_space_grids(4.5, 24)


@pytest.fixture(scope="module")
def gaussian_field(grids):
    return gaussian_wigner(*grids)


@pytest.fixture(scope="module")
def product_field(grids):
    return product_wigner(*grids)


@pytest.fixture(scope="module")
def first_excited_plane():
    """W1(x, p) of the first oscillator excitation on a fine 2D grid."""
    z = np.linspace(-6.0, 6.0, 401)
    X, P = np.meshgrid(z, z, indexing='ij')
    u = X ** 2 + P ** 2
    dz = float(z[1] - z[0])
    return SyntheticField(values=(2 * u - 1) * np.exp(-u) / math.pi, cell_volume=dz * dz)


# -----------------------------------------------------------------------------
# Gaussian: no negativity
# -----------------------------------------------------------------------------
def test_gaussian_entropy(gaussian_field):
    ent = complex_entropy(gaussian_field)
    assert ent.h_r == pytest.approx(GAUSSIAN_H_R, abs=1e-6)
    assert ent.h_i == 0.0 and ent.N == 0.0
    assert ent.as_complex() == complex(ent.h_r, 0.0)


def test_gaussian_has_no_negative_channel(gaussian_field):
    with pytest.raises(DegenerateChannelError) as info:
        split_channels(gaussian_field)
    assert info.value.mass == 0.0


# -----------------------------------------------------------------------------
# Negative volume
# -----------------------------------------------------------------------------
def test_first_excitation_negative_volume(first_excited_plane):
    assert negative_volume(first_excited_plane) == pytest.approx(PRODUCT_NEGATIVE_VOLUME, abs=5e-4)


def test_product_negative_volume_and_h_i(product_field):
    ent = complex_entropy(product_field)
    assert ent.N == pytest.approx(PRODUCT_NEGATIVE_VOLUME, abs=3e-2)
    assert ent.h_i == pytest.approx(PRODUCT_H_I, abs=0.1)
    assert ent.h_i == pytest.approx(math.pi * ent.N, rel=1e-12)


def test_transformed_product_mode_negative_volume(product_state, state_momentum):
    positions = Grid2D.spanning(-4.0, 4.0, -4.0, 4.0, 33, 33)
    ent = complex_entropy(wigner_transform(product_state, state_momentum, positions))
    assert ent.N == pytest.approx(PRODUCT_NEGATIVE_VOLUME, abs=1e-3)
    assert ent.h_i == pytest.approx(math.pi * ent.N, rel=1e-12)


def test_abs_route_matches(product_field, first_excited_plane):
    for f in (product_field, first_excited_plane):
        assert negative_volume_from_abs(f) == pytest.approx(negative_volume(f), abs=1e-9)


def test_tiny_negative_cell():
    field = SyntheticField(values=np.array([0.5, 0.5, -1e-200, 1.0]), cell_volume=1.0)
    ent = complex_entropy(field)
    assert ent.N == pytest.approx(1e-200, rel=1e-12)
    assert math.isfinite(ent.h_r)


def test_h_r_ignores_zero_cells():
    field = SyntheticField(values=np.array([0.0, 0.25, 0.25, 0.5]), cell_volume=1.0)
    expected = -(2 * 0.25 * math.log(0.25) + 0.5 * math.log(0.5))
    assert complex_entropy(field).h_r == pytest.approx(expected, rel=1e-14)


def test_h_r_is_invariant_under_momentum_inversion(product_field):
    flipped = SyntheticField(values=product_field.values[:, :, ::-1, ::-1],
                             cell_volume=product_field.cell_volume)
    a, b = complex_entropy(product_field), complex_entropy(flipped)
    assert b.h_r == pytest.approx(a.h_r, rel=1e-12)
    assert b.N == pytest.approx(a.N, rel=1e-12)


# -----------------------------------------------------------------------------
# Channels
# -----------------------------------------------------------------------------
def test_channel_decomposition(product_field):
    dec = split_channels(product_field)
    dv = dec.cell_volume
    assert dec.Z_minus == pytest.approx(negative_volume(product_field), rel=1e-12)
    assert dec.Z_plus - dec.Z_minus == pytest.approx(1.0, abs=1e-6)
    assert np.sum(dec.P_plus) * dv == pytest.approx(1.0, abs=1e-10)
    assert np.sum(dec.P_minus) * dv == pytest.approx(1.0, abs=1e-10)
    assert dec.P_plus.min() >= 0 and dec.P_minus.min() >= 0
    assert not np.any(dec.plus_support & dec.minus_support)
    assert np.all(dec.P_plus * dec.P_minus == 0)
    np.testing.assert_allclose(dec.reassemble(), product_field.values, atol=1e-15)


def test_all_negative_field_has_no_positive_channel():
    field = SyntheticField(values=-np.ones(4), cell_volume=0.25)
    with pytest.raises(DegenerateChannelError):
        split_channels(field)
