"""
helmholtz.py - Dirichlet Helmholtz eigenmodes of the billiard on a finite-difference grid
helmholtz.py - 有限差分网格上台球的狄利克雷亥姆霍兹本征模

(lap + k^2) psi = 0 inside, psi = 0 on the wall. The negative 5-point Laplacian
restricted to interior nodes is symmetric positive definite; its eigenvalues
are k^2. Pairs near a target window are found by shift-invert Lanczos (ARPACK),
whose inner solves use a sparse LU factorization.

Also here: overlaps, sign (gauge) alignment, branch tracking over theta by
wavefunction continuity, and avoided-crossing location.
"""

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, ArpackNoConvergence

from config import EIGEN_TOL, RESIDUAL_LIMIT, DEGENERATE_GAP, MIN_OVERLAP
from errors import (ValidationError, SolverError, GaugeError, TrackingError,
                    MonotoneGapWarning)
from geometry import OvalShape, Grid2D, DomainMask, build_mask, mirror_y

logger = logging.getLogger(__name__)

DENSE_LIMIT = 400            # below this many unknowns use a dense eigensolver


@dataclass
class EigenMode:
    """Wavenumber and real wavefunction on a grid (zero outside the domain)."""
    k: float
    psi: np.ndarray
    grid: Grid2D
    shape: Optional[OvalShape] = None
    residual: float = 0.0

    @property
    def theta(self) -> float:
        return self.shape.theta if self.shape is not None else float('nan')

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.psi * self.psi) * self.grid.cell_area))

    def flipped(self) -> 'EigenMode':
        return replace(self, psi=-self.psi)


@dataclass
class BranchSample:
    theta: float
    k: float
    mode: EigenMode


@dataclass
class SpectrumBranch:
    """One eigenvalue curve k(theta), followed by wavefunction continuity."""
    label: str
    samples: List[BranchSample] = field(default_factory=list)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([s.theta for s in self.samples])

    @property
    def ks(self) -> np.ndarray:
        return np.array([s.k for s in self.samples])

    @property
    def modes(self) -> List[EigenMode]:
        return [s.mode for s in self.samples]

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class AvoidedCrossing:
    theta_star: float
    gap: float
    index: int               # sample nearest to theta_star
    interior: bool = True    # False: the gap was monotone, no interior minimum


# -----------------------------------------------------------------------------
# Operator
# -----------------------------------------------------------------------------
def interior_index(mask: DomainMask) -> np.ndarray:
    """Unknown number of every node, -1 outside."""
    index = -np.ones(mask.grid.shape, dtype=np.int64)
    index[mask.inside] = np.arange(mask.interior_count)
    return index


def assemble_operator(mask: DomainMask) -> sp.csr_matrix:
    """
    Negative 5-point Laplacian on the interior nodes.

    Couplings to exterior nodes are dropped (psi = 0 there), which leaves the
    matrix symmetric positive definite.
    """
    grid = mask.grid
    cx = 1.0 / (grid.dx * grid.dx)
    cy = 1.0 / (grid.dy * grid.dy)
    index = interior_index(mask)
    n = mask.interior_count

    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, 2.0 * cx + 2.0 * cy)]

    # x neighbours
    both = mask.inside[:-1, :] & mask.inside[1:, :]
    lo, hi = index[:-1, :][both], index[1:, :][both]
    rows += [lo, hi]
    cols += [hi, lo]
    vals += [np.full(lo.size, -cx), np.full(lo.size, -cx)]

    # y neighbours
    both = mask.inside[:, :-1] & mask.inside[:, 1:]
    lo, hi = index[:, :-1][both], index[:, 1:][both]
    rows += [lo, hi]
    cols += [hi, lo]
    vals += [np.full(lo.size, -cy), np.full(lo.size, -cy)]

    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return A.tocsr()


# -----------------------------------------------------------------------------
# Eigensolver
# -----------------------------------------------------------------------------
def _relative_residuals(A: sp.csr_matrix, vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    R = A @ vecs - vecs * vals[None, :]
    scale = np.maximum(np.abs(vals), 1e-300) * np.linalg.norm(vecs, axis=0)
    return np.linalg.norm(R, axis=0) / scale


def _rotate_to_reference(block: np.ndarray, refs: np.ndarray,
                         min_weight: float = MIN_OVERLAP) -> np.ndarray:
    """
    Orthogonal rotation of a degenerate block that best matches reference vectors.

    block: (n, m) orthonormal columns; refs: (n, r) reference vectors.
    Only references whose projection onto the block exceeds `min_weight` take
    part (at most m, strongest first). Column j of the result aligns with the
    j-th of them in reference order; the remaining columns span the rest of the block.
    """
    m = block.shape[1]
    M = block.T @ refs
    weight = np.linalg.norm(M, axis=0)
    strong = np.flatnonzero(weight > min_weight)
    if strong.size == 0:
        return block
    chosen = np.sort(strong[np.argsort(-weight[strong], kind='stable')[:m]])
    r = chosen.size
    U, _, Vt = np.linalg.svd(M[:, chosen])
    rotation = np.concatenate([U[:, :r] @ Vt, U[:, r:]], axis=1)
    return block @ rotation


def _degenerate_clusters(vals: np.ndarray) -> List[Tuple[int, int]]:
    """(start, stop) index ranges of eigenvalues closer than DEGENERATE_GAP (relative)."""
    clusters = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[i - 1] >= DEGENERATE_GAP * max(1.0, abs(vals[i])):
            if i - start > 1:
                clusters.append((start, i))
            start = i
    return clusters


def solve_mask_modes(mask: DomainMask, count: int,
                     k_window: Optional[Tuple[float, float]] = None,
                     shape: Optional[OvalShape] = None,
                     reference: Optional[Sequence[EigenMode]] = None,
                     tol: float = EIGEN_TOL,
                     residual_limit: float = RESIDUAL_LIMIT,
                     seed: int = 0) -> List[EigenMode]:
    """
    The `count` lowest eigenpairs with k >= k_window[0], sorted by k.

    `reference` modes (usually from the previous theta sample) fix the basis
    inside near-degenerate subspaces; without them the sign is chosen so the
    largest |psi| entry is positive.
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    A = assemble_operator(mask)
    n = A.shape[0]
    if count > n:
        raise ValidationError(f"asked for {count} modes but the mask has {n} interior nodes")
    sigma = float(k_window[0]) ** 2 if k_window is not None else 0.0

    if n <= DENSE_LIMIT:
        vals, vecs = scipy.linalg.eigh(A.toarray())
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        nev = min(n - 1, count + max(4, count))
        while True:
            try:
                vals, vecs = eigsh(A, k=nev, sigma=sigma, which='LM', tol=tol, v0=v0)
            except ArpackNoConvergence as exc:
                worst = float('inf')
                if exc.eigenvalues is not None and len(exc.eigenvalues):
                    worst = float(np.max(_relative_residuals(A, exc.eigenvalues, exc.eigenvectors)))
                raise SolverError(
                    f"ARPACK did not converge ({len(exc.eigenvalues)} of {nev} pairs), "
                    f"worst residual {worst:.3e}", residual=worst) from exc
            if np.count_nonzero(vals >= sigma) >= count or nev >= n - 1:
                break
            nev = min(n - 1, 2 * nev)
            logger.debug(f"window start k={np.sqrt(sigma):.6g}: widening to {nev} pairs")

    order = np.argsort(vals, kind='stable')
    vals, vecs = vals[order], vecs[:, order]
    keep = vals >= sigma
    vals, vecs = vals[keep], vecs[:, keep]
    if len(vals) < count:
        raise SolverError(f"only {len(vals)} eigenpairs found above k={np.sqrt(sigma):.6g}")

    # clusters are closed before truncating, so a pair straddling `count` is rotated whole
    refs = None
    if reference:
        refs = np.stack([m.psi[mask.inside] for m in reference], axis=1)
    for start, stop in _degenerate_clusters(vals):
        if start >= count:
            break
        block, _ = np.linalg.qr(vecs[:, start:stop])
        if refs is not None:
            block = _rotate_to_reference(block, refs)
        vecs[:, start:stop] = block
    vals, vecs = vals[:count], vecs[:, :count]

    residuals = _relative_residuals(A, vals, vecs)
    worst = float(np.max(residuals))
    if worst > residual_limit:
        raise SolverError(f"eigenpair residual {worst:.3e} exceeds {residual_limit:.1e}",
                          residual=worst)

    grid = mask.grid
    modes = []
    for j in range(count):
        v = vecs[:, j] / np.sqrt(np.sum(vecs[:, j] ** 2) * grid.cell_area)
        if refs is None:
            pivot = int(np.argmax(np.abs(v)))
            if v[pivot] < 0:
                v = -v
        psi = np.zeros(grid.shape)
        psi[mask.inside] = v
        modes.append(EigenMode(k=float(np.sqrt(vals[j])), psi=psi, grid=grid,
                               shape=shape, residual=float(residuals[j])))
    return modes


def solve_modes(shape: OvalShape, grid: Grid2D, count: int,
                k_window: Optional[Tuple[float, float]] = None, **kwargs) -> List[EigenMode]:
    mask = build_mask(shape, grid)
    modes = solve_mask_modes(mask, count, k_window, shape=shape, **kwargs)
    logger.debug(f"theta={shape.theta:.6g}: k = " + ", ".join(f"{m.k:.8f}" for m in modes))
    return modes


# -----------------------------------------------------------------------------
# Overlaps and gauge
# -----------------------------------------------------------------------------
def overlap(mode_a: EigenMode, mode_b: EigenMode) -> float:
    mode_a.grid.check_same(mode_b.grid, "mode grids")
    return float(np.sum(mode_a.psi * mode_b.psi) * mode_a.grid.cell_area)


def overlap_matrix(modes_a: Sequence[EigenMode], modes_b: Sequence[EigenMode]) -> np.ndarray:
    grid = modes_a[0].grid
    for m in list(modes_a) + list(modes_b):
        grid.check_same(m.grid, "mode grids")
    Pa = np.stack([m.psi.ravel() for m in modes_a])
    Pb = np.stack([m.psi.ravel() for m in modes_b])
    return (Pa @ Pb.T) * grid.cell_area


def align_gauge(reference: EigenMode, mode: EigenMode,
                min_overlap: float = MIN_OVERLAP) -> EigenMode:
    """mode or -mode, whichever has non-negative overlap with reference."""
    ov = overlap(reference, mode)
    if abs(ov) <= min_overlap:
        raise GaugeError(f"ambiguous gauge: |overlap| = {abs(ov):.4f} <= {min_overlap}", overlap=ov)
    return mode if ov >= 0 else mode.flipped()


def mode_parity(mode: EigenMode) -> int:
    """+1 / -1 for modes even / odd in y, 0 when neither (grid must be y-symmetric)."""
    grid = mode.grid
    if abs(grid.y_min + grid.y[-1]) > 1e-9 * grid.dy * grid.ny:
        raise ValidationError("parity needs a grid symmetric about y = 0")
    p = float(np.sum(mode.psi * mirror_y(mode.psi)) * grid.cell_area) / mode.norm() ** 2
    if p > 0.5:
        return 1
    if p < -0.5:
        return -1
    return 0


# -----------------------------------------------------------------------------
# Branch tracking
# -----------------------------------------------------------------------------
def _greedy_match(O: np.ndarray) -> List[int]:
    """For each row the column assigned by greedy maximum matching."""
    m = O.shape[0]
    order = np.argsort(-O, axis=None, kind='stable')
    match = [-1] * m
    used = set()
    for flat in order:
        i, j = divmod(int(flat), O.shape[1])
        if match[i] < 0 and j not in used:
            match[i] = j
            used.add(j)
            if len(used) == m:
                break
    return match


def match_step(previous: Sequence[EigenMode], current: Sequence[EigenMode],
               theta_prev: float, theta_cur: float,
               min_overlap: float = MIN_OVERLAP) -> List[EigenMode]:
    """current modes reordered (and sign-aligned) to continue each previous mode."""
    O = np.abs(overlap_matrix(previous, current))
    match = _greedy_match(O)
    out = []
    for i, j in enumerate(match):
        if j < 0 or O[i, j] <= min_overlap:
            best = O[i, j] if j >= 0 else 0.0
            raise TrackingError(
                f"branch {i + 1}: best |overlap| {best:.3f} <= {min_overlap} between "
                f"theta={theta_prev:.6g} and theta={theta_cur:.6g} (step too coarse)",
                theta_from=theta_prev, theta_to=theta_cur)
        out.append(align_gauge(previous[i], current[j], min_overlap))
    return out


def track_branches(per_theta_modes: Sequence[Sequence[EigenMode]],
                   thetas: Optional[Sequence[float]] = None,
                   labels: Optional[Sequence[str]] = None,
                   min_overlap: float = MIN_OVERLAP) -> List[SpectrumBranch]:
    """
    Follow each mode of the first sample through the sweep by greedy maximum
    |overlap| matching; identity follows the wavefunction, not eigenvalue order.
    """
    if len(per_theta_modes) < 2:
        raise ValidationError(f"tracking needs >= 2 theta samples, got {len(per_theta_modes)}")
    if thetas is None:
        thetas = [modes[0].theta for modes in per_theta_modes]
    thetas = [float(t) for t in thetas]
    if len(thetas) != len(per_theta_modes):
        raise ValidationError("one theta per mode list is required")
    if any(t1 <= t0 for t0, t1 in zip(thetas, thetas[1:])):
        raise ValidationError("theta samples must be strictly increasing")
    m = len(per_theta_modes[0])
    if any(len(modes) != m for modes in per_theta_modes):
        raise ValidationError("every theta sample must carry the same number of modes")
    if labels is None:
        labels = [f"mode {i + 1}" for i in range(m)]

    branches = [SpectrumBranch(label=labels[i]) for i in range(m)]
    heads = list(per_theta_modes[0])
    for b, mode in zip(branches, heads):
        b.samples.append(BranchSample(thetas[0], mode.k, mode))
    for t in range(1, len(thetas)):
        heads = match_step(heads, per_theta_modes[t], thetas[t - 1], thetas[t], min_overlap)
        for b, mode in zip(branches, heads):
            b.samples.append(BranchSample(thetas[t], mode.k, mode))
    return branches


# -----------------------------------------------------------------------------
# Avoided crossing
# -----------------------------------------------------------------------------
def parabolic_vertex(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float, float]:
    """
    Vertex (x*, y*) of the parabola through three points, and its curvature
    coefficient. Non-uniform spacing is allowed.
    """
    x0, x1, x2 = (float(v) for v in xs)
    y0, y1, y2 = (float(v) for v in ys)
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    B = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    C = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / denom
    if A == 0.0:
        return x1, y1, 0.0
    xv = -B / (2.0 * A)
    return xv, C - B * B / (4.0 * A), A


def detect_avoided_crossing(branch1: SpectrumBranch, branch2: SpectrumBranch) -> AvoidedCrossing:
    """
    theta* = argmin |k2 - k1|, refined by the parabola through the three samples
    around the discrete minimum.
    """
    thetas = branch1.thetas
    if len(branch2) != len(branch1) or not np.array_equal(thetas, branch2.thetas):
        raise ValidationError("branches must share the same theta samples")
    gaps = np.abs(branch2.ks - branch1.ks)
    i = int(np.argmin(gaps))
    if i == 0 or i == len(gaps) - 1:
        msg = (f"gap between '{branch1.label}' and '{branch2.label}' is monotone "
               f"(minimum {gaps[i]:.6g} at the sweep end theta={thetas[i]:.6g})")
        logger.warning(msg)
        warnings.warn(msg, MonotoneGapWarning)
        return AvoidedCrossing(theta_star=float(thetas[i]), gap=float(gaps[i]), index=i,
                               interior=False)

    xv, yv, curv = parabolic_vertex(thetas[i - 1:i + 2], gaps[i - 1:i + 2])
    if curv <= 0 or not thetas[i - 1] <= xv <= thetas[i + 1] or yv <= 0:
        xv, yv = float(thetas[i]), float(gaps[i])
    return AvoidedCrossing(theta_star=float(xv), gap=float(yv), index=i)
