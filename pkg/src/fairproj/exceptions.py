"""Error types raised across the package.

Plain ``ValueError`` is used for ordinary invalid arguments; the classes here
mark conditions callers may want to catch individually.
"""


class ConvergenceError(RuntimeError):
    """An iterative solve hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class NumericBlowupError(RuntimeError):
    """A solver produced a non-finite iterate."""


class DegenerateMarginalError(ValueError):
    """A required (group, class) marginal cell has no probability mass."""


class UndefinedRateError(ValueError):
    """A rate needed by a metric conditions on an empty (group, class) cell."""


class InvalidModelError(ValueError):
    """A model file or model object is malformed or inconsistent."""


class InfeasibilityError(ValueError):
    """The strictly feasible reference classifier violates a constraint."""


class CsvSchemaError(ValueError):
    """A CSV file is missing required columns or has a bad header."""


class CsvParseError(ValueError):
    """A CSV cell could not be parsed; message names the row and column."""
