"""Exception hierarchy shared across the package.

The CLI maps each branch to an exit code: configuration problems exit
with 2, data problems with 3 and numerical failures with 4.
"""

from __future__ import annotations

__all__ = [
    "CausalSelError",
    "ConfigError",
    "DataError",
    "DivergenceError",
    "InsufficientDataError",
    "NonStationaryError",
    "NumericalError",
    "OptimizationFailed",
    "SelectionFailed",
]


class CausalSelError(Exception):
    """Base class for all package errors."""


class ConfigError(CausalSelError, ValueError):
    """Invalid configuration text or option values."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(CausalSelError, ValueError):
    """Malformed or non-finite input data."""

    def __init__(self, message: str, row: int | None = None) -> None:
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class InsufficientDataError(DataError):
    """Too few observations (or grid points) for the requested operation."""


class NumericalError(CausalSelError, ArithmeticError):
    """Base class for numerical failures."""


class NonStationaryError(NumericalError, ValueError):
    """Parameter outside the stationarity region."""


class DivergenceError(NumericalError):
    """A forward recursion overflowed to a non-finite value."""

    def __init__(self, step: int) -> None:
        self.step = step
        super().__init__(f"recursion diverged to a non-finite value at step {step}")


class OptimizationFailed(NumericalError):
    """Every start of the optimizer ended at a non-finite objective."""

    def __init__(self, message: str, best_iterate=None) -> None:
        self.best_iterate = best_iterate
        super().__init__(message)


class SelectionFailed(NumericalError):
    """Every candidate model failed to fit."""
