"""
negativity.py - Complex Wigner entropy, negative volume, and sign-resolved channels
negativity.py - 复 Wigner 熵、负体积与符号分解通道

H[W] = -integral W ln W on the principal branch = h_r + i h_i, with
h_r = -integral W ln|W| and h_i = pi * N, N = integral over {W < 0} of |W|.
W = Z+ P+ - Z- P- splits the field into two normalized nonnegative shapes.

All integrals are Riemann sums on the uniform grid.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from config import LOG_FLOOR, CHANNEL_MIN_MASS
from errors import DegenerateChannelError, NumericalError

logger = logging.getLogger(__name__)

ARG_ROUTE_TOL = 1e-10


@dataclass
class ComplexEntropy:
    h_r: float
    h_i: float
    N: float

    def as_complex(self) -> complex:
        return complex(self.h_r, self.h_i)


@dataclass
class ChannelDecomposition:
    Z_plus: float
    Z_minus: float
    P_plus: np.ndarray
    P_minus: np.ndarray
    plus_support: np.ndarray      # W > 0
    minus_support: np.ndarray     # W < 0
    cell_volume: float

    def reassemble(self) -> np.ndarray:
        return self.Z_plus * self.P_plus - self.Z_minus * self.P_minus


def _values_and_volume(field):
    """(values, cell volume) of a WignerField or any object carrying both."""
    return np.asarray(field.values), float(field.cell_volume)


def negative_volume(field) -> float:
    """N = sum over W < 0 of |W| dV."""
    W, dv = _values_and_volume(field)
    return float(-np.sum(W[W < 0]) * dv)


def negative_volume_from_abs(field) -> float:
    """(integral |W| - integral W) / 2; equals N for any field, and (integral |W| - 1)/2 when normalized."""
    W, dv = _values_and_volume(field)
    return float(0.5 * (np.sum(np.abs(W)) - np.sum(W)) * dv)


def split_channels(field) -> ChannelDecomposition:
    W, dv = _values_and_volume(field)
    W_plus = np.maximum(W, 0.0)
    W_minus = np.maximum(-W, 0.0)
    Z_plus = float(np.sum(W_plus) * dv)
    Z_minus = float(np.sum(W_minus) * dv)
    if Z_minus < CHANNEL_MIN_MASS:
        raise DegenerateChannelError(
            f"negative channel mass {Z_minus:.3e} below {CHANNEL_MIN_MASS:.0e}; the state is negativity-free",
            mass=Z_minus)
    if Z_plus < CHANNEL_MIN_MASS:
        raise DegenerateChannelError(f"positive channel mass {Z_plus:.3e} is zero", mass=Z_plus)
    return ChannelDecomposition(
        Z_plus=Z_plus, Z_minus=Z_minus,
        P_plus=W_plus / Z_plus, P_minus=W_minus / Z_minus,
        plus_support=W > 0, minus_support=W < 0, cell_volume=dv)


def complex_entropy(field) -> ComplexEntropy:
    """
    h_r skips cells with |W| below LOG_FLOOR (t ln t -> 0). h_i is pi times the
    masked negative volume, checked against the principal-branch argument route.
    """
    W, dv = _values_and_volume(field)
    A = np.abs(W)
    live = A >= LOG_FLOOR
    h_r = float(-np.sum(W[live] * np.log(A[live])) * dv)

    N = negative_volume(field)
    h_i = math.pi * N

    # Im(-W Log W) = -W arg W = pi |W| on W < 0, and 0 elsewhere
    arg = np.angle(W.astype(np.complex128))
    arg_route = float(-np.sum(W * arg) * dv)
    if abs(arg_route - h_i) > ARG_ROUTE_TOL * max(1.0, h_i):
        raise NumericalError(f"h_i routes disagree: pi*N = {h_i!r}, arg route = {arg_route!r}")
    return ComplexEntropy(h_r=h_r, h_i=h_i, N=N)
