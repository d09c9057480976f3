from __future__ import annotations

class SysdistError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(SysdistError, ValueError):
    """Malformed input: wrong shapes, bad weights, unknown options."""


class DomainError(SysdistError, ArithmeticError):
    """Input is well formed but outside the mathematical domain of the operation."""


class PoleOnAxisError(DomainError):
    """A pole sits on (or numerically at) the imaginary axis."""


class IllConditionedError(DomainError):
    """A Hamiltonian has eigenvalues too close to the imaginary axis."""


class ResolutionError(DomainError):
    """A frequency grid is too coarse to track a phase unambiguously."""


class PointAtInfinityError(DomainError):
    """Stereographic projection of the north pole."""


class ParseError(SysdistError):
    """Malformed input file; carries the line and column when known."""

    def __init__(self, message: str, path=None, line: int | None = None, column: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:{column}:"
            where += " "
        super().__init__(where + message)
        self.path = path
        self.line = line
        self.column = column
