"""Exception types shared across the package."""

from __future__ import annotations


class FluctlabError(Exception):
    """Base class for all package-specific failures."""


class NonConvergence(FluctlabError):
    """An iterative solve exhausted its budget.

    Carries the best estimate reached so callers that can tolerate a
    degraded value may still use it.
    """

    def __init__(self, message: str, best: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.best = best
        self.iterations = iterations


class PoleCollision(FluctlabError):
    """A resolvent evaluation point landed on (or within 1e-12 of) an
    eigenvalue or the origin."""


class EigenvalueOutsideContour(FluctlabError):
    """A contour integral was requested while some eigenvalue sits on or
    outside the contour; offenders are listed in the message."""

    def __init__(self, message: str, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class SingularPoint(FluctlabError):
    """A limit-law formula was evaluated where it is singular or outside
    its domain of validity."""


class FailureBudgetExceeded(FluctlabError):
    """More than the tolerated fraction of replicates failed to solve."""

    def __init__(self, message: str, failed: int = 0, total: int = 0):
        super().__init__(message)
        self.failed = failed
        self.total = total


class ConfigError(FluctlabError):
    """An experiment configuration violates a validity constraint."""


class SchemaError(FluctlabError):
    """A persisted file does not match its declared schema."""
