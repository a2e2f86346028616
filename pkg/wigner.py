"""
wigner.py - 4D Wigner function of a real eigenmode, slices, and marginals
wigner.py - 实本征模的四维 Wigner 函数、截面与边缘分布

W(r, p) = (2 pi)^-2 * sum_s ds^2 exp(i p.s) psi(r - s/2) psi(r + s/2)      (hbar = 1)

Displacements s_j = (j - n/2) ds and momenta p_m = (m - n/2) dp are both
centered, with dp = 2 pi / (n ds), so the sum is one inverse FFT per position
node. psi at the half-step points comes from bilinear interpolation on the
mode grid and is zero outside the domain. psi is rescaled to unit norm on the
position grid first, so the position marginal is that grid's |psi|^2.

Field arrays are indexed (x, y, p_x, p_y).
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.fft
from joblib import Parallel, delayed
from scipy.interpolate import RegularGridInterpolator

from config import (WIGNER_POSITIONS, WIGNER_MOMENTA, SLICE_SIZE, MOMENTUM_FACTOR,
                    WIGNER_DRIFT_LIMIT, WIGNER_QUADRATURE_LIMIT)
from errors import ValidationError, ResolutionError, EmptyInteriorError, GridMismatchError
from geometry import Grid2D
from helmholtz import EigenMode

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MomentumGrid:
    """Centered momentum samples, conjugate to the displacement sampling."""
    np_x: int
    np_y: int
    dp_x: float
    dp_y: float

    def __post_init__(self):
        if self.np_x < 2 or self.np_y < 2 or self.np_x % 2 or self.np_y % 2:
            raise ValidationError(f"momentum counts must be even and >= 2, got {self.np_x}x{self.np_y}")
        if self.dp_x <= 0 or self.dp_y <= 0:
            raise ValidationError("momentum spacing must be positive")

    @property
    def ds_x(self) -> float:
        return TWO_PI / (self.np_x * self.dp_x)

    @property
    def ds_y(self) -> float:
        return TWO_PI / (self.np_y * self.dp_y)

    @property
    def px(self) -> np.ndarray:
        return (np.arange(self.np_x) - self.np_x // 2) * self.dp_x

    @property
    def py(self) -> np.ndarray:
        return (np.arange(self.np_y) - self.np_y // 2) * self.dp_y

    @property
    def sx(self) -> np.ndarray:
        return (np.arange(self.np_x) - self.np_x // 2) * self.ds_x

    @property
    def sy(self) -> np.ndarray:
        return (np.arange(self.np_y) - self.np_y // 2) * self.ds_y

    @property
    def cell_area(self) -> float:
        return self.dp_x * self.dp_y

    def covers(self, width_x: float, width_y: float) -> bool:
        """Displacement window [-n ds/2, n ds/2) reaches every separation inside the support."""
        return (self.np_x * self.ds_x >= 2.0 * width_x * (1 - 1e-12)
                and self.np_y * self.ds_y >= 2.0 * width_y * (1 - 1e-12))

    @classmethod
    def for_extent(cls, p_max: float, width_x: float, width_y: float,
                   count: int = WIGNER_MOMENTA) -> 'MomentumGrid':
        """
        Window |p| <= p_max with at least `count` samples per axis; the count is
        raised (to an even number) until the displacements cover twice the support width.
        """
        if p_max <= 0:
            raise ValidationError(f"p_max must be positive, got {p_max}")
        ds = math.pi / p_max
        counts = []
        for width in (width_x, width_y):
            n = max(count, int(math.ceil(2.0 * width / ds - 1e-9)))
            n += n % 2
            if n > count:
                logger.info(f"momentum count raised {count} -> {n} to cover support width {width:.4g}")
            counts.append(n)
        dp = [TWO_PI / (n * ds) for n in counts]
        return cls(counts[0], counts[1], dp[0], dp[1])

    @classmethod
    def for_mode(cls, mode: EigenMode, count: int = WIGNER_MOMENTA,
                 factor: float = MOMENTUM_FACTOR) -> 'MomentumGrid':
        width_x, width_y = support_widths(mode)
        return cls.for_extent(factor * mode.k, width_x, width_y, count)


@dataclass
class WignerField:
    values: np.ndarray          # (nx, ny, np_x, np_y)
    positions: Grid2D
    momentum: MomentumGrid
    raw_norm: float = 1.0       # integral of W as computed
    quadrature: float = 1.0     # position-grid quadrature of psi^2 before rescaling

    @property
    def drift(self) -> float:
        return abs(self.raw_norm - 1.0)

    @property
    def quadrature_error(self) -> float:
        return abs(self.quadrature - 1.0)

    @property
    def cell_volume(self) -> float:
        return self.positions.cell_area * self.momentum.cell_area

    def check_compatible(self, other: 'WignerField', what: str = "Wigner fields"):
        self.positions.check_same(other.positions, what + " (positions)")
        if self.momentum != other.momentum:
            raise GridMismatchError(f"{what} (momenta) differ: {self.momentum} vs {other.momentum}")


@dataclass
class WignerSlice:
    """Section x-p_x at y = p_y = 0 (axis 'X') or y-p_y at x = p_x = 0 (axis 'Y')."""
    axis: str
    values: np.ndarray          # (n_coord, n_momentum)
    coords: np.ndarray
    momenta: np.ndarray

    @property
    def cell_area(self) -> float:
        return float((self.coords[1] - self.coords[0]) * (self.momenta[1] - self.momenta[0]))


# -----------------------------------------------------------------------------
# Helpers
# -----------------------------------------------------------------------------
def _support_box(mode: EigenMode) -> Tuple[float, float, float, float]:
    nz = np.nonzero(mode.psi)
    if len(nz[0]) == 0:
        raise ValidationError("mode is identically zero")
    x, y = mode.grid.x, mode.grid.y
    return x[nz[0].min()], x[nz[0].max()], y[nz[1].min()], y[nz[1].max()]


def support_widths(mode: EigenMode) -> Tuple[float, float]:
    """Largest x and y separations at which the interpolated mode can be nonzero."""
    x0, x1, y0, y1 = _support_box(mode)
    return x1 - x0 + 2 * mode.grid.dx, y1 - y0 + 2 * mode.grid.dy


def default_positions(mode: EigenMode, count: int = WIGNER_POSITIONS) -> Grid2D:
    x0, x1, y0, y1 = _support_box(mode)
    return Grid2D.spanning(x0, x1, y0, y1, count, count)


def _interpolator(mode: EigenMode, scale: float = 1.0) -> RegularGridInterpolator:
    return RegularGridInterpolator((mode.grid.x, mode.grid.y), scale * mode.psi, method='linear',
                                   bounds_error=False, fill_value=0.0)


def _on_positions(mode: EigenMode, positions: Grid2D) -> np.ndarray:
    X, Y = positions.mesh()
    return _interpolator(mode)(np.stack((X, Y), axis=-1))


def position_quadrature(mode: EigenMode, positions: Grid2D) -> float:
    """Quadrature of the interpolated psi^2 over the position nodes."""
    psi = _on_positions(mode, positions)
    return float(np.sum(psi * psi) * positions.cell_area)


def position_density(mode: EigenMode, positions: Grid2D) -> np.ndarray:
    """|psi|^2 on the position nodes, normalized on that grid; the position marginal of the field."""
    psi2 = _on_positions(mode, positions) ** 2
    return psi2 / (np.sum(psi2) * positions.cell_area)


def _check_coverage(mode: EigenMode, momentum: MomentumGrid):
    width_x, width_y = support_widths(mode)
    if not momentum.covers(width_x, width_y):
        raise ResolutionError(
            f"displacement window {momentum.np_x * momentum.ds_x:.4g} x {momentum.np_y * momentum.ds_y:.4g} "
            f"does not cover twice the support {width_x:.4g} x {width_y:.4g}; raise the momentum count")


def _symmetrize(values: np.ndarray, axes: Tuple[int, ...]) -> np.ndarray:
    """Average with the p -> -p image; the unpaired -n/2 row is left as is."""
    inner = [slice(None)] * values.ndim
    flipped = [slice(None)] * values.ndim
    for ax in axes:
        inner[ax] = slice(1, None)
        flipped[ax] = slice(None, 0, -1)
    out = values.copy()
    out[tuple(inner)] = 0.5 * (values[tuple(inner)] + values[tuple(flipped)])
    return out


def _position_row(interp: RegularGridInterpolator, x: float, ys: np.ndarray,
                  momentum: MomentumGrid) -> np.ndarray:
    """W(x, y_j, p) for one x node, shape (ny, np_x, np_y)."""
    SX, SY = np.meshgrid(momentum.sx, momentum.sy, indexing='ij')
    Y = ys[:, None, None]
    plus = np.stack(np.broadcast_arrays(x + 0.5 * SX[None], Y + 0.5 * SY[None]), axis=-1)
    minus = np.stack(np.broadcast_arrays(x - 0.5 * SX[None], Y - 0.5 * SY[None]), axis=-1)
    C = interp(plus) * interp(minus)
    F = scipy.fft.fftshift(scipy.fft.ifft2(scipy.fft.ifftshift(C, axes=(1, 2)), axes=(1, 2)),
                           axes=(1, 2))
    scale = momentum.np_x * momentum.np_y * momentum.ds_x * momentum.ds_y / TWO_PI ** 2
    return F.real * scale


# -----------------------------------------------------------------------------
# Transform
# -----------------------------------------------------------------------------
def wigner_transform(mode: EigenMode, momentum: MomentumGrid,
                     positions: Optional[Grid2D] = None,
                     drift_limit: float = WIGNER_DRIFT_LIMIT,
                     quadrature_limit: float = WIGNER_QUADRATURE_LIMIT,
                     workers: int = 1) -> WignerField:
    """
    Full 4D Wigner field of a normalized real mode.

    psi is first rescaled to unit norm on the position-grid quadrature; the
    deviation of that quadrature from 1 is recorded as `quadrature` and must stay
    within `quadrature_limit`. The position marginal of the result is then
    position_density(mode, positions), and the raw integral of W is 1 up to the
    transform's own error, which must stay within `drift_limit`. Either failure
    raises ResolutionError.
    """
    _check_coverage(mode, momentum)
    if positions is None:
        positions = default_positions(mode)
    q = position_quadrature(mode, positions)
    if not abs(q - 1.0) <= quadrature_limit:
        raise ResolutionError(
            f"position quadrature of psi^2 is {q:.6g}, off by more than {quadrature_limit:.1e} "
            f"(positions {positions.nx}x{positions.ny}, spacing {positions.dx:.4g}); refine the position grid")
    interp = _interpolator(mode, 1.0 / math.sqrt(q))
    xs, ys = positions.x, positions.y

    rows = Parallel(n_jobs=workers, prefer='threads')(
        delayed(_position_row)(interp, float(x), ys, momentum) for x in xs)
    values = np.stack(rows, axis=0)
    values = _symmetrize(values, axes=(2, 3))

    raw = float(np.sum(values) * positions.cell_area * momentum.cell_area)
    drift = abs(raw - 1.0)
    if drift > drift_limit:
        raise ResolutionError(
            f"Wigner normalization drift {drift:.3e} exceeds {drift_limit:.1e} "
            f"(momenta {momentum.np_x}x{momentum.np_y}, positions {positions.nx}x{positions.ny})")
    logger.debug(f"wigner k={mode.k:.6g}: {values.shape}, quadrature {q:.6g}, drift {drift:.3e}")
    return WignerField(values=values, positions=positions, momentum=momentum, raw_norm=raw,
                       quadrature=q)


def wigner_slice(mode: EigenMode, axis: str, resolution: int = SLICE_SIZE,
                 momentum: Optional[MomentumGrid] = None,
                 coords: Optional[np.ndarray] = None,
                 factor: float = MOMENTUM_FACTOR) -> WignerSlice:
    """
    W along one cut: 'X' gives W(x, 0, p_x, 0), 'Y' gives W(0, y, 0, p_y).

    The transverse momentum is zero, so the correlation is summed over the
    transverse displacement and only a 1D transform remains. Not renormalized.
    """
    axis = axis.upper()
    if axis not in ('X', 'Y'):
        raise ValidationError(f"slice axis must be 'X' or 'Y', got {axis!r}")
    if momentum is None:
        momentum = MomentumGrid.for_mode(mode, resolution, factor)
    _check_coverage(mode, momentum)

    x0, x1, y0, y1 = _support_box(mode)
    along_x = axis == 'X'
    lo, hi = (x0, x1) if along_x else (y0, y1)
    cross_lo, cross_hi = (mode.grid.y[0], mode.grid.y[-1]) if along_x else (mode.grid.x[0], mode.grid.x[-1])
    if not cross_lo <= 0.0 <= cross_hi:
        raise EmptyInteriorError(f"{axis} cut at 0 lies outside the mode grid")
    if coords is None:
        coords = np.linspace(lo, hi, resolution)
    coords = np.asarray(coords, dtype=np.float64)

    if along_x:
        s_cut, s_cross, ds_cut, ds_cross = momentum.sx, momentum.sy, momentum.ds_x, momentum.ds_y
        p_cut, n_cut = momentum.px, momentum.np_x
    else:
        s_cut, s_cross, ds_cut, ds_cross = momentum.sy, momentum.sx, momentum.ds_y, momentum.ds_x
        p_cut, n_cut = momentum.py, momentum.np_y

    interp = _interpolator(mode)
    U, V = np.broadcast_arrays(coords[:, None, None] + 0.5 * s_cut[None, :, None],
                               0.5 * s_cross[None, None, :])
    U2 = 2.0 * coords[:, None, None] - U
    if along_x:
        plus = np.stack((U, V), axis=-1)
        minus = np.stack((U2, -V), axis=-1)
    else:
        plus = np.stack((V, U), axis=-1)
        minus = np.stack((-V, U2), axis=-1)
    C = np.sum(interp(plus) * interp(minus), axis=2)
    if not np.any(C):
        raise EmptyInteriorError(f"{axis} cut does not intersect the mode support")

    F = scipy.fft.fftshift(scipy.fft.ifft(scipy.fft.ifftshift(C, axes=1), axis=1), axes=1)
    values = F.real * (n_cut * ds_cut * ds_cross / TWO_PI ** 2)
    return WignerSlice(axis=axis, values=_symmetrize(values, axes=(1,)), coords=coords, momenta=p_cut)


# -----------------------------------------------------------------------------
# Reductions
# -----------------------------------------------------------------------------
def marginals(field: WignerField) -> Tuple[np.ndarray, np.ndarray]:
    """(position density on the position grid, momentum density on the momentum grid)."""
    position = np.sum(field.values, axis=(2, 3)) * field.momentum.cell_area
    momentum = np.sum(field.values, axis=(0, 1)) * field.positions.cell_area
    return position, momentum


def normalization(field: WignerField) -> float:
    return float(np.sum(field.values) * field.cell_volume)


def purity(field: WignerField) -> float:
    """(2 pi)^2 * integral of W^2; 1 for a pure state."""
    return float(TWO_PI ** 2 * np.sum(field.values ** 2) * field.cell_volume)


def inversion_asymmetry(field: WignerField) -> float:
    """max |W(r, p) - W(r, -p)| over paired momentum nodes."""
    inner = field.values[:, :, 1:, 1:]
    return float(np.max(np.abs(inner - inner[:, :, ::-1, ::-1])))


def radial_profile(density: np.ndarray, momentum: MomentumGrid,
                   bins: int = 64) -> Tuple[np.ndarray, np.ndarray]:
    """Angular average of a momentum density against |p|: (bin centres, mean density)."""
    PX, PY = np.meshgrid(momentum.px, momentum.py, indexing='ij')
    radius = np.hypot(PX, PY).ravel()
    edges = np.linspace(0.0, radius.max(), bins + 1)
    total, _ = np.histogram(radius, bins=edges, weights=density.ravel())
    count, _ = np.histogram(radius, bins=edges)
    profile = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
    return 0.5 * (edges[1:] + edges[:-1]), profile
