"""Exception hierarchy shared by the solver, the analysis tools and the CLI."""

from __future__ import annotations


class SelsegError(Exception):
    """Base class for every error raised by :mod:`selseg`."""


class DimensionError(SelsegError, ValueError):
    """Field shapes do not fit the grid hierarchy or each other."""

    def __init__(self, message: str, suggestion: tuple[int, int] | None = None) -> None:
        if suggestion is not None:
            message = f"{message} (largest valid crop: {suggestion[0]}x{suggestion[1]})"
        super().__init__(message)
        self.suggestion = suggestion


class ParameterError(SelsegError, ValueError):
    """A user supplied parameter or marker violates its invariants."""


class FormatError(SelsegError, ValueError):
    """An input file is malformed."""

    def __init__(self, message: str, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} at byte offset {offset}"
        super().__init__(message)
        self.offset = offset


class NumericError(SelsegError, ArithmeticError):
    """Non-finite values or a vanishing divisor."""


class DegenerateRegionError(NumericError):
    """One of the two segmentation regions carries no weight."""


class SingularSystemError(NumericError):
    """A local linear system has a zero pivot."""


class DivergenceError(SelsegError):
    """An iteration produced non-finite or growing iterates."""


class CoarseSolverError(DivergenceError):
    """The coarsest-level solve failed to contract."""


__all__ = [
    "SelsegError",
    "DimensionError",
    "ParameterError",
    "FormatError",
    "NumericError",
    "DegenerateRegionError",
    "SingularSystemError",
    "DivergenceError",
    "CoarseSolverError",
]
