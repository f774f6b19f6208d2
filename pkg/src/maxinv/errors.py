"""Exception hierarchy.

Every error carries a short ``category`` string that the command line
front end prints and maps to an exit code.
"""


class MaxinvError(Exception):
    category = "error"
    exit_code = 1


class GeometryError(MaxinvError):
    category = "geometry"
    exit_code = 2


class NonConformingSpacing(GeometryError):
    pass


class DegenerateAxis(GeometryError):
    pass


class InnerNotContained(GeometryError):
    pass


class CoefficientError(MaxinvError):
    category = "coefficient"
    exit_code = 3


class OutOfBounds(CoefficientError):
    pass


class OutsideInner(CoefficientError):
    pass


class ClampContact(CoefficientError):
    pass


class ShapeMismatch(MaxinvError):
    category = "shape"
    exit_code = 4


class TraceMismatch(ShapeMismatch):
    pass


class HistoryMismatch(ShapeMismatch):
    pass


class SolverError(MaxinvError):
    category = "solver"
    exit_code = 5


class CflViolation(SolverError):
    pass


class NonFinite(SolverError):
    pass


class DegenerateGradient(SolverError):
    pass


class ZeroDenominator(MaxinvError):
    category = "metric"
    exit_code = 6


class ConfigError(MaxinvError):
    category = "config"
    exit_code = 7


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class IoError(MaxinvError):
    category = "io"
    exit_code = 8


class NonDecreasingObjective(UserWarning):
    """Line search could not reduce the functional along the current direction."""
