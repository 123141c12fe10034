"""Exception types raised across the package."""


class KerrPulseError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(KerrPulseError, ValueError):
    pass


class DimensionMismatchError(KerrPulseError, ValueError):
    pass


class SingularParameterError(KerrPulseError, ZeroDivisionError):
    pass


class UndefinedParameterError(KerrPulseError, ValueError):
    pass


class SolverError(KerrPulseError, RuntimeError):
    """Any failure of a time-stepping solver."""


class StiffnessError(SolverError):
    pass


class IntegrityError(SolverError):
    pass


class ConvergenceError(SolverError):
    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class QsdStepError(SolverError):
    pass


class BesselRangeError(KerrPulseError, ArithmeticError):
    pass


class WignerConsistencyError(KerrPulseError, ArithmeticError):
    pass


class ConfigError(KerrPulseError, ValueError):
    """Malformed or invalid scenario configuration.

    ``field`` names the offending key when one can be identified and
    ``line`` carries the document line for parse errors.
    """

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line


class TruncationWarning(UserWarning):
    """The top of the Fock basis picked up non-negligible population."""
