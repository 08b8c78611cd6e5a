"""Exception types raised across the package."""


class OrbcorrError(Exception):
    """Base class for all package errors."""


class ParseError(OrbcorrError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(ParseError):
    """Structurally invalid file, e.g. a missing FCIDUMP namelist header."""


class DimensionError(OrbcorrError, ValueError):
    pass


class DuplicateError(OrbcorrError, ValueError):
    pass


class DegenerateStateError(OrbcorrError, ValueError):
    """Zero-norm wavefunction."""


class ArgumentError(OrbcorrError, ValueError):
    pass


class ModelError(OrbcorrError, ValueError):
    """Wavefunction does not satisfy the symmetry a fermionic analysis needs."""


class CapacityError(OrbcorrError, ValueError):
    pass


class NormalizationError(OrbcorrError, ValueError):
    pass


class PSDViolationError(OrbcorrError, ValueError):
    pass


class UndefinedMetricError(OrbcorrError, ValueError):
    pass


class ConsistencyError(OrbcorrError, ValueError):
    pass


class ConvergenceError(OrbcorrError, RuntimeError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)
