"""Exception types shared across the library and mapped to CLI exit codes."""

from __future__ import annotations


class DiqkdError(Exception):
    """Base class for all library-specific errors."""


class DomainError(DiqkdError):
    """An input lies outside the mathematical domain of an operation.

    Examples: a CHSH value outside [2, 2sqrt(2)], a marginal outside [-1, 1],
    or a point violating the quantum boundary <A1>^2 + S^2/4 <= 2.
    """


class BracketError(DiqkdError):
    """A root or threshold search was given endpoints that do not straddle
    the crossing it is asked to locate."""


class RefutedError(DiqkdError):
    """A certification run found an explicit witness cell violating the
    candidate affine bound.

    Attributes
    ----------
    witness : tuple
        ``(a1, S, slack)`` for the offending rectangle corner: the candidate
        plane exceeds the provable bound there by ``slack`` even after the
        per-cell tolerance is accounted for.
    """

    def __init__(self, message: str, witness: tuple[float, float, float]):
        super().__init__(message)
        self.witness = witness
