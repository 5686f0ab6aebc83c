"""
Exception hierarchy for opspec.

Every error carries a human-readable ``detail``, the process ``exit_code``
the CLI should return, and an optional ``context`` dict with the numbers
that triggered it. Exit code 2 marks usage/input problems, exit code 1
marks verified failures and internal inconsistencies.
"""

from __future__ import annotations

from typing import Any


class OpspecError(Exception):
    """Base class for all errors raised by the library."""

    exit_code: int = 2

    def __init__(self, detail: str, **context: Any) -> None:
        super().__init__(detail)
        self.detail = detail
        self.context = context

    def __str__(self) -> str:
        if not self.context:
            return self.detail
        extras = ", ".join(f"{key}={value!r}" for key, value in sorted(self.context.items()))
        return f"{self.detail} ({extras})"


# =========================================================================
# Input / usage errors (exit 2)
# =========================================================================


class ConfigError(OpspecError):
    """Configuration file or override failed validation."""


class FamilyParseError(OpspecError):
    """Family document is not valid JSON or violates the schema."""

    def __init__(self, detail: str, pointer: str = "", **context: Any) -> None:
        super().__init__(detail, pointer=pointer, **context)
        self.pointer = pointer


class FamilyValidationError(FamilyParseError):
    """Family document parsed but its numeric payload is inadmissible."""


class DomainError(OpspecError):
    """Evaluation point or vector outside the admissible domain."""


class PoleProximityError(DomainError):
    """Evaluation point too close to a pole of a Schur complement family."""


class AmbiguousWindowError(OpspecError):
    """Open spectral window endpoint lies within tolerance of an eigenvalue."""


class DimensionError(OpspecError):
    """Shapes of the supplied matrices or bases do not fit together."""


class RankDeficiencyError(OpspecError):
    """Columns of a basis are linearly dependent within tolerance."""


class ContainmentError(OpspecError):
    """A subspace is not contained in the subspace it is supposed to live in."""


class ContractionError(OpspecError):
    """Angular operator has spectral norm larger than one."""


class NotInResolventError(OpspecError):
    """The operator value at the requested point is singular within tolerance."""


class HypothesisError(OpspecError):
    """A hypothesis of the requested theorem is not satisfied by the input."""


class PreconditionError(OpspecError):
    """An interval endpoint or argument violates an operation's precondition."""


# =========================================================================
# Verified failures / internal errors (exit 1)
# =========================================================================


class InsufficientSpectrumError(OpspecError):
    """Fewer eigenvalues were located than requested."""

    exit_code = 1


class NoGapError(OpspecError):
    """No resolvent point above the requested eigenvalue inside the domain."""

    exit_code = 1


class A3InconsistencyError(OpspecError):
    """A form changed sign more than once, so the family violates (A3)."""

    exit_code = 1


class NotAnEigenvectorError(OpspecError):
    """Vector is not an eigenvector of the operator value within tolerance."""

    exit_code = 1


class InternalConsistencyError(OpspecError):
    """Two independent computations that must agree did not."""

    exit_code = 1


class ConvergenceError(OpspecError):
    """Dense eigensolver failed to converge."""

    exit_code = 1


__all__ = [
    "OpspecError",
    "ConfigError",
    "FamilyParseError",
    "FamilyValidationError",
    "DomainError",
    "PoleProximityError",
    "AmbiguousWindowError",
    "DimensionError",
    "RankDeficiencyError",
    "ContainmentError",
    "ContractionError",
    "NotInResolventError",
    "HypothesisError",
    "PreconditionError",
    "InsufficientSpectrumError",
    "NoGapError",
    "A3InconsistencyError",
    "NotAnEigenvectorError",
    "InternalConsistencyError",
    "ConvergenceError",
]
