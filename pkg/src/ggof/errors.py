"""Exception and warning types shared across the package."""

from __future__ import annotations


class GgofError(Exception):
    """Base class for all package errors."""


class DomainError(GgofError, ValueError):
    """An input lies outside the domain of a function (NaN, out of range)."""


class EmptyRegionError(GgofError, ValueError):
    """The truncation region selects no ordered p-value."""


class UnsupportedModelError(GgofError, ValueError):
    """The requested engine cannot handle the supplied correlation model."""


class DimensionMismatchError(GgofError, ValueError):
    """Array shapes that must agree do not."""


class SingularMatrixError(GgofError, ValueError):
    """A matrix that must be positive definite failed to factorize.

    Parameters
    ----------
    message : str
        Human-readable reason.
    pivot : int, optional
        Zero-based index of the first failing pivot, when known.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class ConvergenceError(GgofError, RuntimeError):
    """An iterative procedure did not converge."""


class ApproximationWarning(UserWarning):
    """An engine degraded its approximation (clamped correlations, underflow, atoms)."""
