"""Exception types."""

from __future__ import annotations


class GammaDamageError(Exception):
    """Base class for all package errors."""


class ParameterError(GammaDamageError, ValueError):
    """Inputs violate a precondition."""


class RegimeError(ParameterError):
    """A density is undefined for the given limit rates."""


class UnsupportedModeError(GammaDamageError):
    """The requested evaluation mode does not apply to the inputs."""


class GeometryError(GammaDamageError):
    """Degenerate or inconsistent mesh geometry."""


class UsageError(GammaDamageError):
    """Objects passed together do not belong together."""


class BudgetError(ParameterError):
    """A brute-force search exceeds its size budget."""


class ConvergenceError(GammaDamageError):
    """An iterative method stopped before meeting its tolerance.

    ``best`` carries the best value found; ``history`` the residual or
    value history when one exists.
    """

    def __init__(self, message: str, best=None, history=None):
        super().__init__(message)
        self.best = best
        self.history = list(history) if history is not None else []


class CSVParseError(GammaDamageError):
    """A report CSV could not be parsed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
