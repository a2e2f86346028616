"""
errors.py - Exception and warning classes shared by all modules
errors.py - 各模块共用的异常与警告类

ValidationError covers bad input (CLI exit code 1).
NumericalError covers failures of the numerics themselves (CLI exit code 2).
"""


class ValidationError(ValueError):
    """Invalid input, configuration, or file contents."""


class NumericalError(RuntimeError):
    """A numerical stage could not produce a trustworthy result."""


# -----------------------------------------------------------------------------
# Validation errors
# -----------------------------------------------------------------------------
class ShapeError(ValidationError):
    pass


class DomainError(ValidationError):
    """Point outside the region where the boundary equation is defined (1 + theta*x <= 0)."""


class EmptyInteriorError(ValidationError):
    pass


class GridMismatchError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class DumpFormatError(ValidationError):
    pass


class DumpLengthError(DumpFormatError):
    pass


class DumpDtypeError(DumpFormatError):
    pass


# -----------------------------------------------------------------------------
# Numerical errors
# -----------------------------------------------------------------------------
class SolverError(NumericalError):
    def __init__(self, message: str, residual: float = float('nan')):
        super().__init__(message)
        self.residual = residual


class GaugeError(NumericalError):
    def __init__(self, message: str, overlap: float = float('nan')):
        super().__init__(message)
        self.overlap = overlap


class TrackingError(NumericalError):
    def __init__(self, message: str, theta_from: float = float('nan'),
                 theta_to: float = float('nan')):
        super().__init__(message)
        self.theta_from = theta_from
        self.theta_to = theta_to


class ResolutionError(NumericalError):
    pass


class DegenerateChannelError(NumericalError):
    def __init__(self, message: str, mass: float = 0.0):
        super().__init__(message)
        self.mass = mass


class EmptyMaskError(NumericalError):
    pass


# -----------------------------------------------------------------------------
# Warnings
# -----------------------------------------------------------------------------
class MonotoneGapWarning(UserWarning):
    """Gap between two branches has no interior minimum."""


class MaskedMassWarning(UserWarning):
    """The score floor excluded more channel mass than the warning threshold."""


class NoExtremumWarning(UserWarning):
    """h_i has no interior local maximum in the sampled range."""


class WeakCrossingWarning(UserWarning):
    """No pair in the k window passes the avoided-crossing tests; a fallback pair is used."""
