"""Exception types raised across the package.

All of them derive from ``SiloDPError`` (itself a ``ValueError``) so the CLI
can turn any library failure into a machine-readable error record.
"""


class SiloDPError(ValueError):
    """Base class for library errors."""

    kind = "error"


class DimensionError(SiloDPError):
    kind = "dimension"


class PreconditionError(SiloDPError):
    kind = "precondition"


class InvalidDatasetError(SiloDPError):
    kind = "invalid_dataset"


class CalibrationError(SiloDPError):
    kind = "calibration"


class ConfigurationError(SiloDPError):
    kind = "configuration"


class UndefinedMetricError(SiloDPError):
    kind = "undefined_metric"


class ParseError(SiloDPError):
    kind = "parse"

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class SchemaError(SiloDPError):
    kind = "schema"


class ConvergenceError(SiloDPError):
    """Raised when an optimizer exhausts its iteration budget."""

    kind = "convergence"

    def __init__(self, message, grad_norm):
        super().__init__(message)
        self.grad_norm = grad_norm
