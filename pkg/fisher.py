"""
fisher.py - Channel Fisher informations, score field, and the negativity Fisher bound
fisher.py - 通道 Fisher 信息、得分场与负性 Fisher 界

Every quantity is a central difference over a triple of gauge-aligned fields
at (theta - delta, theta, theta + delta) on identical grids.

    S        = d/dtheta ln|W|                on the shared negative support
    F_tilde  = E_P-[S^2]                      (noncentered)
    F_minus  = Var_P-(S) = F_tilde - E_P-[S]^2
    dN/dth   = N * E_P-[S]
    |dh_i/dth| <= pi * N * sqrt(F_tilde)     (Cauchy-Schwarz)

Mean, variance and second moment all use the same renormalized P- weights on
the same mask, so the decomposition and the bound hold to rounding.
"""

import logging
import math
import warnings
from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

from config import SCORE_FLOOR, MASKED_WARNING
from errors import (EmptyMaskError, GridMismatchError, ValidationError,
                    MaskedMassWarning, NoExtremumWarning)
from helmholtz import parabolic_vertex
from negativity import split_channels, negative_volume

logger = logging.getLogger(__name__)


@dataclass
class ScoreField:
    values: np.ndarray        # S on the masked cells, in mask order
    mask: np.ndarray
    delta: float

    @property
    def size(self) -> int:
        return int(self.values.size)


@dataclass
class ScoreMoments:
    mean: float
    second_moment: float      # F_tilde
    variance: float           # F_minus
    masked_fraction: float


@dataclass
class ChannelFisher:
    F: float
    masked_fraction: float


@dataclass
class FisherReport:
    theta: float
    delta: float
    N: float
    Z_plus: float
    F_plus: float
    F_minus: float
    F_tilde_minus: float
    F_minus_direct: float
    mean_score: float
    dN_dtheta: float          # N * E[S]
    dN_dtheta_fd: float       # (N(theta+delta) - N(theta-delta)) / 2 delta
    dhi_dtheta: float         # pi * dN_dtheta
    dhi_fd: float
    bound_rhs: float = 0.0
    slack: float = 0.0
    decomposition_residual: float = 0.0
    masked_fraction: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


# -----------------------------------------------------------------------------
# Helpers
# -----------------------------------------------------------------------------
def _check_grids(*fields):
    first = fields[0]
    for other in fields[1:]:
        if hasattr(first, 'check_compatible'):
            first.check_compatible(other, "Fisher triple")
        elif (np.shape(first.values) != np.shape(other.values)
              or not math.isclose(first.cell_volume, other.cell_volume, rel_tol=1e-12)):
            raise GridMismatchError(
                f"Fisher triple grids differ: {np.shape(first.values)} vs {np.shape(other.values)}")


def _warn_masked(what: str, fraction: float, limit: float):
    if fraction > limit:
        msg = f"{what}: score floor excluded {100 * fraction:.2f}% of the channel mass"
        logger.warning(msg)
        warnings.warn(msg, MaskedMassWarning)


# -----------------------------------------------------------------------------
# Score and channel Fisher
# -----------------------------------------------------------------------------
def score_field(field_lo, field_hi, delta: float, floor: float = SCORE_FLOOR,
                center=None) -> ScoreField:
    """
    S = (ln|W(theta+delta)| - ln|W(theta-delta)|) / (2 delta) where both flanks
    (and the centre, if given) are negative with |W| above floor * max|W_centre|.
    """
    if delta <= 0:
        raise ValidationError(f"delta must be positive, got {delta}")
    _check_grids(*[f for f in (field_lo, center, field_hi) if f is not None])
    W_lo = np.asarray(field_lo.values)
    W_hi = np.asarray(field_hi.values)
    ref = np.asarray(center.values) if center is not None else np.maximum(np.abs(W_lo), np.abs(W_hi))
    cut = floor * float(np.max(np.abs(ref)))

    mask = (W_lo < 0) & (W_hi < 0) & (-W_lo > cut) & (-W_hi > cut)
    if center is not None:
        mask &= (ref < 0) & (-ref > cut)
    if not np.any(mask):
        raise EmptyMaskError("flanking fields share no negative support above the score floor")
    S = (np.log(-W_hi[mask]) - np.log(-W_lo[mask])) / (2.0 * delta)
    return ScoreField(values=S, mask=mask, delta=delta)


def channel_fisher(P_lo: np.ndarray, P_center: np.ndarray, P_hi: np.ndarray,
                   delta: float, cell_volume: float, floor: float = SCORE_FLOOR,
                   masked_warning: float = MASKED_WARNING,
                   what: str = "channel") -> ChannelFisher:
    """
    F = sum P * ((ln P(theta+delta) - ln P(theta-delta)) / 2 delta)^2 dV over cells
    where all three shapes exceed floor * max P_center; P is renormalized on the mask.
    """
    if delta <= 0:
        raise ValidationError(f"delta must be positive, got {delta}")
    if not (np.shape(P_lo) == np.shape(P_center) == np.shape(P_hi)):
        raise GridMismatchError("channel shapes live on different grids")
    cut = floor * float(np.max(P_center))
    mask = (P_lo > cut) & (P_center > cut) & (P_hi > cut)
    if not np.any(mask):
        raise EmptyMaskError(f"{what}: empty common support above the floor")
    w = P_center[mask] * cell_volume
    mass = float(np.sum(w))
    masked = max(0.0, 1.0 - mass)
    _warn_masked(what, masked, masked_warning)
    d = (np.log(P_hi[mask]) - np.log(P_lo[mask])) / (2.0 * delta)
    return ChannelFisher(F=float(np.sum(w * d * d) / mass), masked_fraction=masked)


def noncentered_fisher(score: ScoreField, P_minus: np.ndarray, cell_volume: float) -> ScoreMoments:
    """E, E[S^2] and Var of the score under P- restricted (and renormalized) to the score mask."""
    w = P_minus[score.mask] * cell_volume
    mass = float(np.sum(w))
    if mass <= 0:
        raise EmptyMaskError("negative channel carries no mass on the score mask")
    w = w / mass
    S = score.values
    mean = float(np.sum(w * S))
    second = float(np.sum(w * S * S))
    variance = float(np.sum(w * (S - mean) ** 2))
    return ScoreMoments(mean=mean, second_moment=second, variance=variance,
                        masked_fraction=max(0.0, 1.0 - mass))


# -----------------------------------------------------------------------------
# Report
# -----------------------------------------------------------------------------
def verify_decomposition(report: FisherReport) -> float:
    """F_tilde - F_minus - (dN/dtheta / N)^2 with the score-mean derivative."""
    ratio = report.dN_dtheta / report.N if report.N > 0 else 0.0
    return report.F_tilde_minus - report.F_minus - ratio * ratio


def fisher_bound_check(report: FisherReport) -> float:
    """pi N sqrt(F_tilde) - |dh_i/dtheta|; never below -1e-9 * bound for consistent data."""
    return report.bound_rhs - abs(report.dhi_dtheta)


def fisher_report(field_lo, field_center, field_hi, delta: float,
                  floor: float = SCORE_FLOOR, masked_warning: float = MASKED_WARNING,
                  theta: float = float('nan')) -> FisherReport:
    _check_grids(field_lo, field_center, field_hi)
    dv = float(field_center.cell_volume)
    dec_lo = split_channels(field_lo)
    dec_c = split_channels(field_center)
    dec_hi = split_channels(field_hi)

    score = score_field(field_lo, field_hi, delta, floor, center=field_center)
    moments = noncentered_fisher(score, dec_c.P_minus, dv)
    _warn_masked("negative channel score", moments.masked_fraction, masked_warning)

    plus = channel_fisher(dec_lo.P_plus, dec_c.P_plus, dec_hi.P_plus, delta, dv, floor,
                          masked_warning, what="positive channel")
    minus = channel_fisher(dec_lo.P_minus, dec_c.P_minus, dec_hi.P_minus, delta, dv, floor,
                           masked_warning, what="negative channel")

    N = dec_c.Z_minus
    dN = N * moments.mean
    dN_fd = (negative_volume(field_hi) - negative_volume(field_lo)) / (2.0 * delta)
    report = FisherReport(
        theta=theta, delta=delta, N=N, Z_plus=dec_c.Z_plus,
        F_plus=plus.F, F_minus=moments.variance, F_tilde_minus=moments.second_moment,
        F_minus_direct=minus.F, mean_score=moments.mean,
        dN_dtheta=dN, dN_dtheta_fd=dN_fd,
        dhi_dtheta=math.pi * dN, dhi_fd=math.pi * dN_fd,
        bound_rhs=math.pi * N * math.sqrt(moments.second_moment),
        masked_fraction=moments.masked_fraction)
    report.decomposition_residual = verify_decomposition(report)
    report.slack = fisher_bound_check(report)
    logger.debug(f"theta={theta:.6g}: N={N:.6g} F+={plus.F:.4g} F-={moments.variance:.4g} "
                 f"F~-={moments.second_moment:.4g} slack={report.slack:.3e}")
    return report


# -----------------------------------------------------------------------------
# Avoided-crossing centre
# -----------------------------------------------------------------------------
@dataclass
class CenterDiagnostics:
    found: bool
    index: int
    theta_extremum: float
    h_i_extremum: float
    abs_mean_score: float = float('nan')
    relative_gap: float = float('nan')       # |F_tilde - F_minus| / F_tilde


def ac_center_diagnostics(thetas: Sequence[float], h_i: Sequence[float],
                          mean_score: Optional[Sequence[float]] = None,
                          F_tilde_minus: Optional[Sequence[float]] = None,
                          F_minus: Optional[Sequence[float]] = None) -> CenterDiagnostics:
    """Interior maximum of h_i(theta) and the score diagnostics at the nearest sample."""
    thetas = np.asarray(thetas, dtype=np.float64)
    h_i = np.asarray(h_i, dtype=np.float64)
    if thetas.size != h_i.size or thetas.size < 3:
        raise ValidationError("need >= 3 matching (theta, h_i) samples")
    i = int(np.argmax(h_i))
    if i == 0 or i == h_i.size - 1:
        msg = f"h_i has no interior maximum on [{thetas[0]:.6g}, {thetas[-1]:.6g}]"
        logger.warning(msg)
        warnings.warn(msg, NoExtremumWarning)
        return CenterDiagnostics(found=False, index=i, theta_extremum=float(thetas[i]),
                                 h_i_extremum=float(h_i[i]))

    xv, yv, curv = parabolic_vertex(thetas[i - 1:i + 2], h_i[i - 1:i + 2])
    if curv >= 0 or not thetas[i - 1] <= xv <= thetas[i + 1]:
        xv, yv = float(thetas[i]), float(h_i[i])
    out = CenterDiagnostics(found=True, index=i, theta_extremum=float(xv), h_i_extremum=float(yv))
    if mean_score is not None:
        out.abs_mean_score = abs(float(mean_score[i]))
    if F_tilde_minus is not None and F_minus is not None and F_tilde_minus[i] > 0:
        out.relative_gap = abs(F_tilde_minus[i] - F_minus[i]) / F_tilde_minus[i]
    return out
