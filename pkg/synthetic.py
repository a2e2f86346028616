"""
synthetic.py - Analytic states, synthetic parameter families, and closed-form oracles
synthetic.py - 解析态、合成参数族与闭式参考值

Used by the tests to validate the numerics against known answers:
1. Gaussian and oscillator product modes (Wigner transform inputs)
2. Closed-form Wigner fields of the same states (entropy / negativity inputs)
3. A 2x2 avoided-crossing family (tracking and crossing detection)
4. Location, mass-scaling and drifting-lobe families (Fisher machinery)
5. Disk and square Dirichlet spectra (eigensolver)
"""

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.special import jn_zeros

from geometry import Grid2D
from helmholtz import EigenMode
from wigner import MomentumGrid, WignerField

# =============================================================================
# Oracle values
# =============================================================================
PRODUCT_WIGNER_ORIGIN = -1.0 / math.pi ** 2            # W of phi1(x) phi0(y) at the origin
PRODUCT_NEGATIVE_VOLUME = 2.0 * math.exp(-0.5) - 1.0   # about 0.213061
PRODUCT_H_I = math.pi * PRODUCT_NEGATIVE_VOLUME        # about 0.66935
GAUSSIAN_H_R = 2.0 * math.log(math.pi) + 2.0           # about 4.28879


@dataclass
class SyntheticField:
    """Signed density on a uniform grid; quacks like a WignerField for negativity and Fisher."""
    values: np.ndarray
    cell_volume: float


# =============================================================================
# Modes
# =============================================================================
def gaussian_mode(grid: Grid2D, sigma: float = 1.0) -> EigenMode:
    """pi^-1/2 sigma^-1 exp(-r^2 / 2 sigma^2); k is the rms momentum."""
    X, Y = grid.mesh()
    psi = np.exp(-(X ** 2 + Y ** 2) / (2 * sigma ** 2)) / (math.sqrt(math.pi) * sigma)
    return EigenMode(k=1.0 / sigma, psi=psi, grid=grid)


def oscillator_product_mode(grid: Grid2D) -> EigenMode:
    """phi1(x) phi0(y) of the unit oscillator."""
    X, Y = grid.mesh()
    psi = math.sqrt(2.0 / math.pi) * X * np.exp(-(X ** 2 + Y ** 2) / 2)
    return EigenMode(k=math.sqrt(2.0), psi=psi, grid=grid)


# =============================================================================
# Closed-form Wigner fields
# =============================================================================
def _phase_mesh(positions: Grid2D, momentum: MomentumGrid):
    return np.meshgrid(positions.x, positions.y, momentum.px, momentum.py, indexing='ij', sparse=True)


def gaussian_wigner(positions: Grid2D, momentum: MomentumGrid) -> WignerField:
    """pi^-2 exp(-r^2 - p^2)."""
    X, Y, PX, PY = _phase_mesh(positions, momentum)
    values = np.exp(-(X ** 2 + Y ** 2 + PX ** 2 + PY ** 2)) / math.pi ** 2
    return WignerField(values=values, positions=positions, momentum=momentum)


def product_wigner(positions: Grid2D, momentum: MomentumGrid) -> WignerField:
    """W1(x, p_x) W0(y, p_y) with W1 = (2u - 1) e^-u / pi, u = x^2 + p_x^2."""
    X, Y, PX, PY = _phase_mesh(positions, momentum)
    u = X ** 2 + PX ** 2
    v = Y ** 2 + PY ** 2
    values = (2 * u - 1) * np.exp(-u - v) / math.pi ** 2
    return WignerField(values=values, positions=positions, momentum=momentum)


def phase_space_grids(half_width: float, count: int):
    """Position grid and momentum grid spanning about [-half_width, half_width] on every axis."""
    positions = Grid2D.spanning(-half_width, half_width, -half_width, half_width, count, count)
    dp = 2.0 * half_width / (count - 1)
    n = count + count % 2
    return positions, MomentumGrid(n, n, dp, dp)


# =============================================================================
# Parameter families
# =============================================================================
def two_level_family(thetas: Sequence[float], g: float = 0.05, slope: float = 1.0,
                     offset: float = 10.0) -> List[List[EigenMode]]:
    """
    Eigenvectors of [[slope*t, g], [g, -slope*t]] embedded on a 2x2 grid,
    k = offset + eigenvalue. The branch gap 2 sqrt((slope t)^2 + g^2) is minimal
    (= 2g) at t = 0.
    """
    grid = Grid2D(0.0, 0.0, 1.0, 1.0, 2, 2)
    out = []
    for t in thetas:
        H = np.array([[slope * t, g], [g, -slope * t]])
        vals, vecs = np.linalg.eigh(H)
        modes = []
        for j in range(2):
            v = vecs[:, j] if vecs[np.argmax(np.abs(vecs[:, j])), j] > 0 else -vecs[:, j]
            psi = np.zeros(grid.shape)
            psi[:, 0] = v
            modes.append(EigenMode(k=offset + float(vals[j]), psi=psi, grid=grid))
        out.append(modes)
    return out


def location_density(z: np.ndarray, theta: float, sigma: float = 0.5) -> np.ndarray:
    """Normal density N(theta, sigma^2); Fisher information 1/sigma^2."""
    return np.exp(-(z - theta) ** 2 / (2 * sigma ** 2)) / (math.sqrt(2 * math.pi) * sigma)


def mass_scaling_field(theta: float, positions: Grid2D = None,
                       momentum: MomentumGrid = None) -> SyntheticField:
    """(1 + theta) W0 with W0 the product-state field: the shapes P+- never change."""
    if positions is None:
        positions, momentum = phase_space_grids(4.5, 24)
    base = product_wigner(positions, momentum)
    return SyntheticField(values=(1.0 + theta) * base.values, cell_volume=base.cell_volume)


def drifting_lobe_field(z: np.ndarray, theta: float, width: float = 0.5,
                        bump_at: float = 6.0) -> SyntheticField:
    """
    Negative Gaussian lobe centred at theta plus a distant positive bump.

    On the lobe S = (z - theta) / width^2, N is constant, and F_minus = 1 / width^2.
    """
    lobe = np.exp(-(z - theta) ** 2 / (2 * width ** 2))
    bump = 2.0 * np.exp(-(z - bump_at) ** 2 / (2 * width ** 2))
    return SyntheticField(values=bump - lobe, cell_volume=float(z[1] - z[0]))


# =============================================================================
# Spectra
# =============================================================================
def disk_wavenumbers(count: int, radius: float = 1.0) -> np.ndarray:
    """Lowest Dirichlet wavenumbers of a disk, with multiplicity (m > 0 modes are doubled)."""
    ks = []
    for m in range(count + 1):
        zeros = jn_zeros(m, count)
        ks.extend(zeros if m == 0 else np.repeat(zeros, 2))
    return np.sort(np.asarray(ks))[:count] / radius


def rectangle_wavenumbers(count: int, width: float = 1.0, height: float = 1.0) -> np.ndarray:
    ks = [math.pi * math.hypot(m / width, n / height)
          for m in range(1, count + 2) for n in range(1, count + 2)]
    return np.sort(np.asarray(ks))[:count]
