"""Exception taxonomy.

``ConfigError`` (a ``ValueError``) covers bad user input; everything derived
from ``NumericalError`` signals a failure of the numerics at run time.  The
CLI maps the former to exit code 2 and the latter to exit code 3.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration, file format, or argument."""


class NumericalError(RuntimeError):
    """Base class for runtime numerical failures."""


class StabilityError(NumericalError):
    """A system matrix is not (sufficiently) stable for the requested operation."""


class ConditioningError(NumericalError):
    """A matrix is singular or too ill-conditioned to use."""


class IndefiniteFactorError(NumericalError):
    """A triangular factorization of identity-minus-rank-one hit an indefinite pivot.

    Recoverable in principle: the caller may retry with different parameters.
    """


class FactorizationError(IndefiniteFactorError):
    """Factored triangular advance could not be built from the current generator.

    Carries the offending generator column and suggested remedies so a caller
    can report where a long run went wrong.
    """

    def __init__(self, message: str, column: int | None = None, step: int | None = None):
        super().__init__(message)
        self.column = column
        self.step = step


class RankOverflowError(NumericalError):
    """Low-rank generator exceeded its permitted rank after truncation."""
