"""
config.py - Defaults, constants, and run configuration for the oval billiard pipeline
"""

from dataclasses import dataclass, fields, asdict
from typing import Dict, Any

from errors import ConfigError

VERSION = "0.3.0"

# =============================================================================
# Geometry
# =============================================================================
DEFAULT_A = 1.2              # semi-axis along x
DEFAULT_B = 1.0              # semi-axis along y
BOUNDARY_EPS = 1e-12         # nodes with f >= 1 - eps are outside (psi = 0 there)
BBOX_RTOL = 1e-10            # relative tolerance of the y-extent maximization

# =============================================================================
# Eigensolver
# =============================================================================
DEFAULT_SOLVER_H = 1.0 / 64.0
EIGEN_TOL = 1e-10            # ARPACK tolerance on eigenvalues
RESIDUAL_LIMIT = 1e-6        # ||(A - k^2) psi|| / (k^2 ||psi||) above this is a failure
DEGENERATE_GAP = 1e-6        # eigenvalues closer than this are treated as one subspace
MIN_OVERLAP = 0.5            # tracking / gauge threshold on |<a|b>|
MAX_HALVINGS = 4             # step halving depth when tracking fails
MAX_GAP_RATIO = 0.5          # crossing gap must be below this fraction of the gap at both sweep ends
EXCHANGE_CROSS = 0.7         # branch exchange: end-to-end cross overlap above this
EXCHANGE_SELF = 0.5          # ... and self overlap below this

# =============================================================================
# Wigner
# =============================================================================
WIGNER_POSITIONS = 48
WIGNER_MOMENTA = 48
SLICE_SIZE = 256
MOMENTUM_FACTOR = 2.5        # |p| <= factor * k
WIGNER_DRIFT_LIMIT = 1e-4    # abort when |integral W - 1| exceeds this
WIGNER_QUADRATURE_LIMIT = 1e-2   # |position-grid quadrature of psi^2 - 1| above this aborts

# =============================================================================
# Negativity / Fisher
# =============================================================================
LOG_FLOOR = 1e-300           # cells with |W| below this contribute 0 to h_r
CHANNEL_MIN_MASS = 1e-12     # Z_- below this: P_- undefined
SCORE_FLOOR = 1e-6           # relative to max|W| of the central field
MASKED_WARNING = 0.05
DEGENERATE_N = 1e-8          # records with N below this skip Fisher statistics

# =============================================================================
# Output
# =============================================================================
CSV_COLUMNS = [
    'theta', 'branch', 'k', 'h_r', 'h_i', 'N', 'Z_plus', 'F_plus', 'F_minus',
    'F_tilde_minus', 'dhi_fd', 'dhi_score', 'bound_rhs', 'slack',
    'decomp_residual', 'masked_fraction', 'degenerate_flag',
]
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


@dataclass
class SweepConfig:
    """Everything that determines the numbers of a sweep."""
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    theta_min: float = 0.0
    theta_max: float = 0.6
    theta_count: int = 41
    fisher_delta: float = 0.0          # 0 = half the theta spacing
    solver_h: float = DEFAULT_SOLVER_H
    eigen_tol: float = EIGEN_TOL
    residual_limit: float = RESIDUAL_LIMIT
    k_min: float = 4.0
    k_max: float = 9.0
    mode_count: int = 16
    wigner_positions: int = WIGNER_POSITIONS
    wigner_momenta: int = WIGNER_MOMENTA
    slice_size: int = SLICE_SIZE
    momentum_factor: float = MOMENTUM_FACTOR
    wigner_drift_limit: float = WIGNER_DRIFT_LIMIT
    wigner_quadrature_limit: float = WIGNER_QUADRATURE_LIMIT
    score_floor: float = SCORE_FLOOR
    masked_warning: float = MASKED_WARNING
    degenerate_threshold: float = DEGENERATE_N
    min_overlap: float = MIN_OVERLAP
    max_halvings: int = MAX_HALVINGS
    max_gap_ratio: float = MAX_GAP_RATIO
    workers: int = 1
    max_concurrent_fields: int = 2
    seed: int = 0
    freeze_shape: bool = False         # test hook: geometry stays at theta = 0
    dump_fields: bool = False
    dump_slices: bool = False
    output_dir: str = "output"

    @property
    def theta_spacing(self) -> float:
        return (self.theta_max - self.theta_min) / (self.theta_count - 1)

    @property
    def delta(self) -> float:
        """Fisher finite-difference step."""
        if self.fisher_delta > 0:
            return self.fisher_delta
        return 0.5 * self.theta_spacing

    def validate(self):
        if self.a <= 0 or self.b <= 0:
            raise ConfigError(f"semi-axes must be positive, got a={self.a}, b={self.b}")
        if self.theta_count < 2:
            raise ConfigError(f"theta_count must be >= 2, got {self.theta_count}")
        if not self.theta_min < self.theta_max:
            raise ConfigError(f"empty theta interval [{self.theta_min}, {self.theta_max}]")
        limit = 1.0 / self.a
        if max(abs(self.theta_min), abs(self.theta_max)) + self.delta >= limit:
            raise ConfigError(
                f"theta interval (with delta={self.delta:g}) must stay inside |theta| < 1/a = {limit:g}")
        if self.fisher_delta < 0:
            raise ConfigError(f"fisher_delta must be >= 0, got {self.fisher_delta}")
        if not self.delta < self.theta_spacing:
            raise ConfigError(
                f"fisher_delta={self.delta:g} must be smaller than the theta spacing {self.theta_spacing:g}")
        for name in ('solver_h', 'eigen_tol', 'residual_limit', 'momentum_factor',
                     'wigner_drift_limit', 'wigner_quadrature_limit', 'masked_warning',
                     'degenerate_threshold'):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ('wigner_positions', 'wigner_momenta', 'slice_size', 'workers',
                     'max_concurrent_fields'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.wigner_positions < 2:
            raise ConfigError("wigner_positions must be >= 2")
        if self.wigner_momenta % 2 or self.slice_size % 2:
            raise ConfigError("momentum counts (wigner_momenta, slice_size) must be even")
        if not 0 <= self.k_min < self.k_max:
            raise ConfigError(f"bad k window [{self.k_min}, {self.k_max}]")
        if self.mode_count < 2:
            raise ConfigError(f"mode_count must be >= 2, got {self.mode_count}")
        if not 0 < self.score_floor < 1:
            raise ConfigError(f"score_floor must be in (0, 1), got {self.score_floor}")
        if not 0 < self.min_overlap < 1:
            raise ConfigError(f"min_overlap must be in (0, 1), got {self.min_overlap}")
        if not 0 < self.max_gap_ratio < 1:
            raise ConfigError(f"max_gap_ratio must be in (0, 1), got {self.max_gap_ratio}")
        if self.max_halvings < 0:
            raise ConfigError("max_halvings must be >= 0")


@dataclass
class RunConfig(SweepConfig):
    """SweepConfig plus logging level and output file names."""
    log_level: str = "INFO"
    csv_name: str = "sweep.csv"
    summary_name: str = "summary.json"
    manifest_name: str = "run-manifest.json"

    def validate(self):
        super().validate()
        if self.log_level.upper() not in LOG_LEVELS:
            raise ConfigError(f"log_level must be one of {LOG_LEVELS}, got {self.log_level!r}")

    def to_dict(self) -> Dict[str, Any]:
        """All fields with defaults materialized, plus the derived delta."""
        out = asdict(self)
        out['resolved_delta'] = self.delta
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known - {'resolved_delta'})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**{k: v for k, v in data.items() if k in known})
