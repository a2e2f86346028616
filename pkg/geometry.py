"""
geometry.py - Oval billiard boundary, grids, and domain masks
geometry.py - 椭圆形台球边界、网格与区域掩码

The boundary is x^2/a^2 + (1 + theta*x) * y^2/b^2 = 1.
theta deforms the ellipse along x; theta = 0 gives the plain ellipse.

Grid arrays are indexed [i, j] <-> (x_i, y_j) everywhere in this package.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from config import BOUNDARY_EPS, BBOX_RTOL
from errors import ShapeError, DomainError, EmptyInteriorError, GridMismatchError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class OvalShape:
    """Billiard boundary parameters."""
    a: float                 # semi-axis along x
    b: float                 # semi-axis along y
    theta: float = 0.0       # deformation, units of 1/length

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ShapeError(f"semi-axes must be positive, got a={self.a}, b={self.b}")
        if abs(self.theta) * self.a >= 1.0:
            raise ShapeError(f"|theta| must be < 1/a = {1.0 / self.a:g}, got {self.theta}")

    def with_theta(self, theta: float) -> 'OvalShape':
        return OvalShape(self.a, self.b, theta)


@dataclass(frozen=True)
class Grid2D:
    """Uniform node grid x_i = x_min + i*dx, y_j = y_min + j*dy."""
    x_min: float
    y_min: float
    dx: float
    dy: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError(f"grid spacing must be positive, got dx={self.dx}, dy={self.dy}")
        if self.nx < 1 or self.ny < 1 or self.nx * self.ny < 4:
            raise ValueError(f"grid needs nx*ny >= 4, got {self.nx}x{self.ny}")

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y_min + self.dy * np.arange(self.ny)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing='ij')

    def check_same(self, other: 'Grid2D', what: str = "grids"):
        if self != other:
            raise GridMismatchError(f"{what} differ: {self} vs {other}")

    @classmethod
    def symmetric(cls, half_x: float, half_y: float, h: float, pad: int = 1) -> 'Grid2D':
        """
        Grid of spacing h covering [-half_x, half_x] x [-half_y, half_y] plus `pad`
        cells on each side. Nodes are mirror-symmetric about both axes, and the
        origin is a node.
        """
        mx = int(np.ceil(half_x / h - 1e-9)) + pad
        my = int(np.ceil(half_y / h - 1e-9)) + pad
        return cls(-mx * h, -my * h, h, h, 2 * mx + 1, 2 * my + 1)

    @classmethod
    def spanning(cls, x_lo: float, x_hi: float, y_lo: float, y_hi: float,
                 nx: int, ny: int) -> 'Grid2D':
        """nx x ny nodes with the first and last node on the interval ends."""
        return cls(x_lo, y_lo, (x_hi - x_lo) / (nx - 1), (y_hi - y_lo) / (ny - 1), nx, ny)


@dataclass
class DomainMask:
    """Interior flags of a grid (True = node inside the billiard)."""
    grid: Grid2D
    inside: np.ndarray
    interior_count: int

    def __post_init__(self):
        if self.inside.shape != self.grid.shape:
            raise ValueError(f"mask shape {self.inside.shape} != grid shape {self.grid.shape}")
        if int(np.count_nonzero(self.inside)) != self.interior_count:
            raise ValueError("interior_count does not match the mask")


# -----------------------------------------------------------------------------
# Boundary tests
# -----------------------------------------------------------------------------
def boundary_value(shape: OvalShape, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    """f(x, y) = x^2/a^2 + (1 + theta*x) y^2/b^2; < 1 inside, = 1 on the boundary."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    stretch = 1.0 + shape.theta * x
    if np.any(stretch <= 0):
        raise DomainError(f"1 + theta*x <= 0 for theta={shape.theta} (x reaches {np.min(x):g})")
    f = x * x / (shape.a * shape.a) + stretch * y * y / (shape.b * shape.b)
    return float(f) if f.ndim == 0 else f


def is_inside(shape: OvalShape, x: ArrayLike, y: ArrayLike) -> Union[bool, np.ndarray]:
    """True iff 1 + theta*x > 0 and f(x, y) < 1. Points with f within 1e-12 of 1 are outside."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x, y = np.broadcast_arrays(x, y)
    stretch = 1.0 + shape.theta * x
    ok = stretch > 0
    f = np.full(x.shape, np.inf)
    f[ok] = (x[ok] ** 2 / shape.a ** 2 + stretch[ok] * y[ok] ** 2 / shape.b ** 2)
    inside = f < 1.0 - BOUNDARY_EPS
    return bool(inside) if inside.ndim == 0 else inside


def _half_width(shape: OvalShape, x: ArrayLike) -> ArrayLike:
    """Boundary y(x) >= 0 for |x| <= a."""
    x = np.asarray(x, dtype=np.float64)
    core = np.clip(1.0 - x * x / (shape.a * shape.a), 0.0, None)
    return shape.b * np.sqrt(core / (1.0 + shape.theta * x))


def bounding_box(shape: OvalShape) -> Tuple[float, float, float, float]:
    """
    (x_min, x_max, y_min, y_max) of the billiard.

    The y extent is the maximum of b*sqrt((1 - x^2/a^2)/(1 + theta*x)) over |x| <= a,
    found by a coarse scan followed by bounded Brent refinement.
    """
    a = shape.a
    if shape.theta == 0.0:
        return (-a, a, -shape.b, shape.b)

    xs = np.linspace(-a, a, 2001)
    ys = _half_width(shape, xs)
    i = int(np.argmax(ys))
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, len(xs) - 1)]
    res = minimize_scalar(lambda t: -float(_half_width(shape, t)), bounds=(lo, hi),
                          method='bounded', options={'xatol': BBOX_RTOL * a})
    y_max = max(float(-res.fun), float(ys[i]))
    return (-a, a, -y_max, y_max)


# -----------------------------------------------------------------------------
# Masks
# -----------------------------------------------------------------------------
def covering_grid(shape: OvalShape, h: float) -> Grid2D:
    """Symmetric grid of spacing h covering the bounding box plus one cell of padding."""
    x0, x1, y0, y1 = bounding_box(shape)
    return Grid2D.symmetric(max(-x0, x1), max(-y0, y1), h, pad=1)


def build_mask(shape: OvalShape, grid: Grid2D) -> DomainMask:
    X, Y = grid.mesh()
    inside = is_inside(shape, X, Y)
    count = int(np.count_nonzero(inside))
    if count == 0:
        raise EmptyInteriorError(f"no grid node lies inside {shape} on {grid}")
    logger.debug(f"mask: {count} interior nodes of {grid.nx}x{grid.ny}")
    return DomainMask(grid=grid, inside=inside, interior_count=count)


def rectangle_mask(grid: Grid2D) -> DomainMask:
    """Every node interior; the Dirichlet wall sits one spacing beyond the outer nodes."""
    inside = np.ones(grid.shape, dtype=bool)
    return DomainMask(grid=grid, inside=inside, interior_count=inside.size)


def mirror_y(values: np.ndarray) -> np.ndarray:
    """Values at (x, -y) for an array on a y-symmetric grid."""
    return values[:, ::-1]
