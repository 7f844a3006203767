"""Exception hierarchy shared across the package."""


class PseudoIVError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PseudoIVError):
    """Bad user-supplied configuration (missing column, unknown preset, ...)."""


class ParseError(PseudoIVError):
    """Non-numeric or malformed input data."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DataError(PseudoIVError):
    """Data violates a structural precondition (too few rows, non-finite values)."""


class DimensionError(PseudoIVError):
    """Incompatible array shapes or out-of-range sizes."""


class DegeneracyError(PseudoIVError):
    """A quantity required to be nonzero/positive is numerically degenerate."""


class LinearAlgebraError(PseudoIVError):
    """Singular or rank-deficient matrix where an inverse/solve is required."""


class BudgetError(PseudoIVError):
    """A brute-force computation would exceed its evaluation budget."""


class PipelineError(PseudoIVError):
    """A pipeline stage could not produce a usable result."""


class DegeneracyWarning(UserWarning):
    """A variance or scale estimate was floored instead of raising."""
