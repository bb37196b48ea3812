"""Exception taxonomy shared by all modules.

Every error raised on purpose derives from :class:`TimebetError`, so callers
(and the CLI exit-code mapping) can distinguish our domain failures from
genuine bugs.
"""

from __future__ import annotations

__all__ = [
    "TimebetError",
    "DomainError",
    "VariantMismatchError",
    "InfiniteDivergenceError",
    "NoSolutionError",
    "SolverError",
    "IntractableError",
]


class TimebetError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(TimebetError, ValueError):
    """An input is outside the documented domain of an operation."""


class VariantMismatchError(DomainError):
    """Two objects that must share a distribution variant do not."""


class InfiniteDivergenceError(TimebetError):
    """A divergence or moment is infinite (absolute continuity fails)."""


class NoSolutionError(TimebetError):
    """A well-posed equation has no solution in the feasible range.

    The message always states the feasible range so the caller can adjust.
    """


class SolverError(TimebetError):
    """A numerical routine failed to converge; carries diagnostics."""


class IntractableError(TimebetError):
    """An exact computation was refused because it would blow up.

    Raised instead of silently falling back to an approximation.
    """
