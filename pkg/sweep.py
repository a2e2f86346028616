"""
sweep.py - Theta sweep: solve -> track -> Wigner -> entropy -> Fisher, plus the crossing summary
sweep.py - theta 扫描：求解、跟踪、Wigner、熵、Fisher 与避免交叉汇总

SweepManager owns the shared grids of one run. Every overlap and every Fisher
triple therefore compares fields sampled on identical nodes.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from config import SweepConfig, CSV_COLUMNS, EXCHANGE_CROSS, EXCHANGE_SELF
from errors import (NumericalError, TrackingError, DegenerateChannelError, EmptyMaskError,
                    WeakCrossingWarning)
from geometry import OvalShape, Grid2D, bounding_box
from helmholtz import (EigenMode, SpectrumBranch, BranchSample, AvoidedCrossing,
                       solve_modes, match_step, mode_parity, overlap,
                       detect_avoided_crossing)
from wigner import MomentumGrid, WignerField, WignerSlice, wigner_transform, wigner_slice
from negativity import complex_entropy
from fisher import fisher_report, ac_center_diagnostics

logger = logging.getLogger(__name__)

POOL_EXTRA = 2               # modes solved above the tracked ones so the top branches stay matchable
LABELS = ('A', 'B', 'C', 'D', 'E', 'F')


@dataclass
class SweepRecord:
    """One branch at one theta sample."""
    theta: float
    branch: str
    k: float
    h_r: float
    h_i: float
    N: float
    Z_plus: float = float('nan')
    F_plus: float = float('nan')
    F_minus: float = float('nan')
    F_tilde_minus: float = float('nan')
    dhi_fd: float = float('nan')
    dhi_score: float = float('nan')
    bound_rhs: float = float('nan')
    slack: float = float('nan')
    decomp_residual: float = float('nan')
    masked_fraction: float = float('nan')
    degenerate_flag: int = 0
    mean_score: float = float('nan')
    F_minus_direct: float = float('nan')
    drift: float = 0.0
    quadrature: float = 1.0
    resolution: str = ""

    def to_dict(self) -> dict:
        return {
            'theta': self.theta,
            'branch': self.branch,
            'k': self.k,
            'h_r': self.h_r,
            'h_i': self.h_i,
            'N': self.N,
            'Z_plus': self.Z_plus,
            'F_plus': self.F_plus,
            'F_minus': self.F_minus,
            'F_tilde_minus': self.F_tilde_minus,
            'dhi_fd': self.dhi_fd,
            'dhi_score': self.dhi_score,
            'bound_rhs': self.bound_rhs,
            'slack': self.slack,
            'decomp_residual': self.decomp_residual,
            'masked_fraction': self.masked_fraction,
            'degenerate_flag': self.degenerate_flag,
            'mean_score': self.mean_score,
            'F_minus_direct': self.F_minus_direct,
            'drift': self.drift,
            'quadrature': self.quadrature,
            'resolution': self.resolution,
        }

    def csv_row(self) -> list:
        d = self.to_dict()
        return [d[c] for c in CSV_COLUMNS]


@dataclass
class LabeledPoint:
    label: str
    branch: str
    index: int
    theta: float
    k: float


@dataclass
class SweepResult:
    records: List[SweepRecord]
    branches: List[SpectrumBranch]          # every tracked branch
    pair: Tuple[int, int]                   # indices of the crossing pair in `branches`
    crossing: AvoidedCrossing
    summary: dict
    labeled: List[LabeledPoint] = field(default_factory=list)
    slices: Dict[str, Tuple[WignerSlice, WignerSlice]] = field(default_factory=dict)
    positions: Optional[Grid2D] = None
    momentum: Optional[MomentumGrid] = None


# -----------------------------------------------------------------------------
# Summary
# -----------------------------------------------------------------------------
def _argpick(thetas: np.ndarray, values: np.ndarray, largest: bool = True) -> float:
    vals = np.asarray(values, dtype=np.float64)
    if not np.any(np.isfinite(vals)):
        return float('nan')
    i = int(np.nanargmax(vals) if largest else np.nanargmin(vals))
    return float(thetas[i])


def summarize(records: Sequence[SweepRecord],
              crossing: Optional[AvoidedCrossing] = None) -> dict:
    """Per-branch locations of the h_i maximum, |dh_i/dtheta| minimum, and F+- peaks."""
    by_branch: Dict[str, List[SweepRecord]] = {}
    for r in records:
        by_branch.setdefault(r.branch, []).append(r)

    theta_star = crossing.theta_star if crossing is not None else float('nan')
    out = {'theta_star': theta_star,
           'gap': crossing.gap if crossing is not None else float('nan'),
           'crossing_interior': bool(crossing.interior) if crossing is not None else False,
           'branches': {}}
    for label, rows in by_branch.items():
        rows = sorted(rows, key=lambda r: r.theta)
        thetas = np.array([r.theta for r in rows])
        live = np.array([not r.degenerate_flag for r in rows])
        h_i = np.array([r.h_i for r in rows])
        F_minus = np.where(live, [r.F_minus for r in rows], np.nan)
        F_plus = np.where(live, [r.F_plus for r in rows], np.nan)
        dhi = np.where(live, np.abs([r.dhi_score for r in rows]), np.nan)

        entry = {
            'samples': len(rows),
            'degenerate': int(np.count_nonzero(~live)),
            'argmax_h_i': _argpick(thetas, h_i),
            'argmin_abs_dhi': _argpick(thetas, dhi, largest=False),
            'argmax_F_minus': _argpick(thetas, F_minus),
            'argmax_F_plus': _argpick(thetas, F_plus),
            'max_F_minus': float(np.nanmax(F_minus)) if np.any(np.isfinite(F_minus)) else float('nan'),
            'max_F_plus': float(np.nanmax(F_plus)) if np.any(np.isfinite(F_plus)) else float('nan'),
        }
        entry['F_minus_exceeds_F_plus'] = bool(entry['max_F_minus'] > entry['max_F_plus'])
        entry['min_slack'] = float(np.nanmin([r.slack for r in rows])) if live.any() else float('nan')
        entry['offsets'] = {key: entry[key] - theta_star for key in
                            ('argmax_h_i', 'argmin_abs_dhi', 'argmax_F_minus', 'argmax_F_plus')}

        if len(rows) >= 3:
            diag = ac_center_diagnostics(thetas, h_i,
                                         mean_score=[r.mean_score for r in rows],
                                         F_tilde_minus=[r.F_tilde_minus for r in rows],
                                         F_minus=[r.F_minus for r in rows])
            entry['h_i_extremum'] = {
                'found': diag.found,
                'index': diag.index,
                'theta': diag.theta_extremum,
                'h_i': diag.h_i_extremum,
                'abs_mean_score': diag.abs_mean_score,
                'relative_gap': diag.relative_gap,
            }
        out['branches'][label] = entry
    return out


def branch_exchange(first: SpectrumBranch, second: SpectrumBranch) -> dict:
    """
    |overlaps| between the sweep ends. Exchanged: both cross overlaps above
    EXCHANGE_CROSS and both self overlaps below EXCHANGE_SELF.
    """
    a0, a1 = first.samples[0].mode, first.samples[-1].mode
    b0, b1 = second.samples[0].mode, second.samples[-1].mode
    self_first, cross_first = abs(overlap(a0, a1)), abs(overlap(a0, b1))
    self_second, cross_second = abs(overlap(b0, b1)), abs(overlap(b0, a1))
    return {
        'self_first': self_first, 'cross_first': cross_first,
        'self_second': self_second, 'cross_second': cross_second,
        'exchanged': bool(min(cross_first, cross_second) > EXCHANGE_CROSS
                          and max(self_first, self_second) < EXCHANGE_SELF),
    }


# -----------------------------------------------------------------------------
# Manager
# -----------------------------------------------------------------------------
class SweepManager:
    """Runs the pipeline over the theta samples of one SweepConfig."""

    def __init__(self, config: SweepConfig):
        config.validate()
        self.config = config
        self.thetas = np.linspace(config.theta_min, config.theta_max, config.theta_count)
        self.grid = self._solver_grid()
        self.branches: List[SpectrumBranch] = []
        self.pair: Tuple[int, int] = (0, 1)
        self.below = 0                       # tracked branches under k_min at theta_min
        self.crossings: List[Tuple[Tuple[int, int], AvoidedCrossing]] = []
        self.positions: Optional[Grid2D] = None
        self.momentum: Optional[MomentumGrid] = None
        logger.info(f"{config.theta_count} theta samples on [{config.theta_min:g}, {config.theta_max:g}], "
                    f"delta={config.delta:g}, solver grid {self.grid.nx}x{self.grid.ny} (h={config.solver_h:g})")

    # --- geometry -----------------------------------------------------------
    def shape_at(self, theta: float) -> OvalShape:
        return OvalShape(self.config.a, self.config.b, 0.0 if self.config.freeze_shape else theta)

    def _extent(self) -> Tuple[float, float]:
        """Half extents covering every shape the run will solve."""
        c = self.config
        samples = np.union1d(np.linspace(c.theta_min - c.delta, c.theta_max + c.delta, 25),
                           [c.theta_min - c.delta, c.theta_max + c.delta])
        y_max = max(bounding_box(self.shape_at(t))[3] for t in samples)
        return c.a, y_max

    def _solver_grid(self) -> Grid2D:
        half_x, half_y = self._extent()
        return Grid2D.symmetric(half_x, half_y, self.config.solver_h, pad=1)

    # --- eigenmodes ---------------------------------------------------------
    def solve_at(self, theta: float, count: int,
                 reference: Optional[Sequence[EigenMode]] = None) -> List[EigenMode]:
        """The `count` lowest modes at theta; the k window only applies to pair selection."""
        c = self.config
        return solve_modes(self.shape_at(theta), self.grid, count, reference=reference,
                           tol=c.eigen_tol, residual_limit=c.residual_limit, seed=c.seed)

    @property
    def pool_size(self) -> int:
        return len(self.branches) + POOL_EXTRA

    def _first_sample(self) -> List[EigenMode]:
        """Every mode below the window plus mode_count modes from k_min up, at theta_min."""
        c = self.config
        count = c.mode_count
        while True:
            modes = self.solve_at(self.thetas[0], count + POOL_EXTRA)
            self.below = sum(m.k < c.k_min for m in modes)
            if count >= self.below + c.mode_count:
                return modes[:self.below + c.mode_count]
            count = self.below + c.mode_count

    def _advance(self, heads: List[EigenMode], t0: float, t1: float, depth: int = 0) -> List[EigenMode]:
        pool = self.solve_at(t1, len(heads) + POOL_EXTRA, reference=heads)
        try:
            return match_step(heads, pool, t0, t1, self.config.min_overlap)
        except TrackingError:
            if depth >= self.config.max_halvings:
                raise
            mid = 0.5 * (t0 + t1)
            logger.info(f"tracking step {t0:.6g} -> {t1:.6g} failed, halving at {mid:.6g}")
            heads = self._advance(heads, t0, mid, depth + 1)
            return self._advance(heads, mid, t1, depth + 1)

    def track(self) -> List[SpectrumBranch]:
        """
        Follow the spectrum from its lowest mode up to mode_count modes into the
        window, so no branch can drift out of the solved pool from below.
        """
        heads = self._first_sample()
        self.branches = [SpectrumBranch(label=f"mode {i + 1}") for i in range(len(heads))]
        for b, m in zip(self.branches, heads):
            b.samples.append(BranchSample(float(self.thetas[0]), m.k, m))
        for t0, t1 in zip(self.thetas[:-1], self.thetas[1:]):
            heads = self._advance(heads, float(t0), float(t1))
            for b, m in zip(self.branches, heads):
                b.samples.append(BranchSample(float(t1), m.k, m))
        logger.info(f"tracked {len(self.branches)} branches ({self.below} below k_min={self.config.k_min:g}): " +
                    ", ".join(f"{b.label} k={b.ks[0]:.5f}->{b.ks[-1]:.5f}" for b in self.branches))
        return self.branches

    # --- crossing pair ------------------------------------------------------
    def _in_window(self, i: int, j: int) -> bool:
        """Both branches inside [k_min, k_max] where their gap is smallest."""
        c = self.config
        first, second = self.branches[i].ks, self.branches[j].ks
        g = int(np.argmin(np.abs(second - first)))
        return all(c.k_min <= k <= c.k_max for k in (first[g], second[g]))

    def crossing_defect(self, i: int, j: int) -> Optional[str]:
        """Why branches i and j do not form an avoided crossing, or None when they do."""
        c = self.config
        first, second = self.branches[i], self.branches[j]
        gaps = np.abs(second.ks - first.ks)
        g = int(np.argmin(gaps))
        if g == 0 or g == len(gaps) - 1:
            return "gap has no interior minimum"
        ends = min(gaps[0], gaps[-1])
        if gaps[g] > c.max_gap_ratio * ends:
            return f"gap {gaps[g]:.4g} is not below {c.max_gap_ratio:g} x end gap {ends:.4g}"
        if gaps[g] <= 10.0 * c.eigen_tol * max(first.ks[g], second.ks[g]):
            return f"gap {gaps[g]:.3e} is at the eigenvalue tolerance"
        ex = branch_exchange(first, second)
        if not ex['exchanged']:
            return (f"no exchange (cross {ex['cross_first']:.3f}/{ex['cross_second']:.3f}, "
                    f"self {ex['self_first']:.3f}/{ex['self_second']:.3f})")
        return None

    def select_pair(self) -> Tuple[Tuple[int, int], AvoidedCrossing]:
        """
        First pair of k-adjacent branches of equal y-parity, inside the k window,
        that passes crossing_defect. Every passing pair is kept in `crossings`.
        Without one, the first in-window pair is used and WeakCrossingWarning raised.
        """
        c = self.config
        parities = [mode_parity(b.samples[0].mode) for b in self.branches]
        candidates = []
        for parity in (1, -1, 0):
            members = [i for i, p in enumerate(parities) if p == parity]
            candidates += list(zip(members[:-1], members[1:]))
        candidates.sort(key=lambda ij: self.branches[ij[0]].ks[0])
        candidates = [ij for ij in candidates if self._in_window(*ij)]
        if not candidates:
            raise NumericalError(
                f"no two tracked branches of equal parity meet inside the k window [{c.k_min:g}, {c.k_max:g}]")

        self.crossings = []
        for i, j in candidates:
            defect = self.crossing_defect(i, j)
            if defect is not None:
                logger.debug(f"{self.branches[i].label}/{self.branches[j].label}: {defect}")
                continue
            self.crossings.append(((i, j), detect_avoided_crossing(self.branches[i], self.branches[j])))

        if self.crossings:
            (i, j), crossing = self.crossings[0]
            logger.info(f"avoided crossing {self.branches[i].label}/{self.branches[j].label} "
                        f"(parity {parities[i]:+d}) at theta*={crossing.theta_star:.6g}, "
                        f"gap={crossing.gap:.6g}; {len(self.crossings)} in the window")
            return (i, j), crossing

        i, j = candidates[0]
        msg = (f"no pair in the k window passes the avoided-crossing tests; using "
               f"{self.branches[i].label}/{self.branches[j].label} ({self.crossing_defect(i, j)})")
        logger.warning(msg)
        warnings.warn(msg, WeakCrossingWarning)
        return (i, j), detect_avoided_crossing(self.branches[i], self.branches[j])

    # --- phase space --------------------------------------------------------
    def _phase_space_grids(self, pair_modes: Sequence[EigenMode]):
        c = self.config
        half_x, half_y = self._extent()
        self.positions = Grid2D.spanning(-half_x, half_x, -half_y, half_y,
                                         c.wigner_positions, c.wigner_positions)
        k_top = max(m.k for m in pair_modes)
        h = c.solver_h
        self.momentum = MomentumGrid.for_extent(c.momentum_factor * k_top,
                                                2 * half_x + 2 * h, 2 * half_y + 2 * h,
                                                c.wigner_momenta)
        logger.info(f"Wigner grids: positions {self.positions.nx}x{self.positions.ny}, "
                    f"momenta {self.momentum.np_x}x{self.momentum.np_y} (|p| <= {c.momentum_factor * k_top:.4g})")

    def _resolution_stamp(self) -> str:
        m = self.momentum
        return (f"h={self.config.solver_h:.6g};pos={self.positions.nx}x{self.positions.ny};"
                f"mom={m.np_x}x{m.np_y};dp={m.dp_x:.6g}x{m.dp_y:.6g};tau={self.config.score_floor:g}")

    def wigner(self, mode: EigenMode, workers: int = 1) -> WignerField:
        return wigner_transform(mode, self.momentum, self.positions,
                                drift_limit=self.config.wigner_drift_limit,
                                quadrature_limit=self.config.wigner_quadrature_limit, workers=workers)

    def _triple(self, index: int, centers: List[EigenMode]) -> Tuple[List[EigenMode], List[EigenMode]]:
        """Fresh solves at theta -+ delta matched to the central modes."""
        theta = float(self.thetas[index])
        delta = self.config.delta
        flanks = []
        for t in (theta - delta, theta + delta):
            pool = self.solve_at(t, self.pool_size, reference=centers)
            flanks.append(match_step(centers, pool, theta, t, self.config.min_overlap))
        return flanks[0], flanks[1]

    def point_records(self, index: int, workers: int = 1) -> List[SweepRecord]:
        """Records of the crossing pair at one theta sample."""
        c = self.config
        theta = float(self.thetas[index])
        branches = [self.branches[i] for i in self.pair]
        centers = [b.samples[index].mode for b in branches]
        lows, highs = self._triple(index, centers)
        stamp = self._resolution_stamp()

        out = []
        for b, lo, mid, hi in zip(branches, lows, centers, highs):
            W_c = self.wigner(mid, workers)
            ent = complex_entropy(W_c)
            rec = SweepRecord(theta=theta, branch=b.label, k=mid.k, h_r=ent.h_r, h_i=ent.h_i,
                              N=ent.N, drift=W_c.drift, quadrature=W_c.quadrature, resolution=stamp)
            if ent.N < c.degenerate_threshold:
                rec.degenerate_flag = 1
                logger.info(f"theta={theta:.6g} {b.label}: N={ent.N:.3e} below threshold, Fisher skipped")
                out.append(rec)
                continue
            try:
                rep = fisher_report(self.wigner(lo, workers), W_c, self.wigner(hi, workers), c.delta,
                                    floor=c.score_floor, masked_warning=c.masked_warning, theta=theta)
            except (DegenerateChannelError, EmptyMaskError) as exc:
                rec.degenerate_flag = 1
                logger.warning(f"theta={theta:.6g} {b.label}: Fisher skipped ({exc})")
                out.append(rec)
                continue
            rec.Z_plus = rep.Z_plus
            rec.F_plus = rep.F_plus
            rec.F_minus = rep.F_minus
            rec.F_tilde_minus = rep.F_tilde_minus
            rec.dhi_fd = rep.dhi_fd
            rec.dhi_score = rep.dhi_dtheta
            rec.bound_rhs = rep.bound_rhs
            rec.slack = rep.slack
            rec.decomp_residual = rep.decomposition_residual
            rec.masked_fraction = rep.masked_fraction
            rec.mean_score = rep.mean_score
            rec.F_minus_direct = rep.F_minus_direct
            out.append(rec)
        logger.info(f"theta={theta:.6g}: " + "; ".join(
            f"{r.branch} h_i={r.h_i:.6g} F-={r.F_minus:.4g}" for r in out))
        return out

    # --- labeled points -----------------------------------------------------
    def labeled_points(self, crossing: AvoidedCrossing) -> List[LabeledPoint]:
        """{theta_min, theta*, theta_max} on each branch of the pair: A-C and D-F."""
        last = len(self.thetas) - 1
        points = []
        labels = iter(LABELS)
        for i in self.pair:
            b = self.branches[i]
            for idx in (0, crossing.index, last):
                s = b.samples[idx]
                points.append(LabeledPoint(next(labels), b.label, idx, s.theta, s.k))
        return points

    def point_slices(self, point: LabeledPoint) -> Tuple[WignerSlice, WignerSlice]:
        b = next(b for b in self.branches if b.label == point.branch)
        mode = b.samples[point.index].mode
        c = self.config
        mom = MomentumGrid.for_mode(mode, c.slice_size, c.momentum_factor)
        return (wigner_slice(mode, 'X', c.slice_size, momentum=mom),
                wigner_slice(mode, 'Y', c.slice_size, momentum=mom))

    # --- driver -------------------------------------------------------------
    def run(self) -> SweepResult:
        c = self.config
        self.track()
        self.pair, crossing = self.select_pair()
        first, second = (self.branches[i] for i in self.pair)
        self._phase_space_grids(first.modes + second.modes)

        point_jobs = max(1, min(c.workers, c.max_concurrent_fields))
        inner = max(1, c.workers // point_jobs)
        per_point = Parallel(n_jobs=point_jobs, prefer='threads')(
            delayed(self.point_records)(i, inner) for i in range(len(self.thetas)))
        records = [r for rows in per_point for r in rows]

        summary = summarize(records, crossing)
        summary['pair'] = [first.label, second.label]
        summary['parity'] = mode_parity(first.samples[0].mode)
        summary['branch_exchange'] = branch_exchange(first, second)
        summary['theta_spacing'] = c.theta_spacing
        summary['delta'] = c.delta
        summary['spectrum'] = {b.label: [float(k) for k in b.ks] for b in self.branches}
        summary['max_drift'] = float(max(r.drift for r in records))
        summary['max_quadrature_error'] = float(max(abs(r.quadrature - 1.0) for r in records))
        summary['crossings_in_window'] = len(self.crossings)
        summary['crossing_qualified'] = bool(self.crossings)

        labeled = self.labeled_points(crossing)
        summary['labeled_points'] = {p.label: {'branch': p.branch, 'theta': p.theta, 'k': p.k}
                                     for p in labeled}
        slices = {}
        if c.dump_slices:
            for p in labeled:
                slices[p.label] = self.point_slices(p)
        return SweepResult(records=records, branches=self.branches, pair=self.pair,
                           crossing=crossing, summary=summary, labeled=labeled, slices=slices,
                           positions=self.positions, momentum=self.momentum)


def run_sweep(config: SweepConfig) -> SweepResult:
    return SweepManager(config).run()
