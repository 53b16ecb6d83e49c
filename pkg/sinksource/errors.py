"""
Exception hierarchy for the sinksource package.

Report-type outcomes (infeasible basis pursuit, non-convergence, failing
certificates) are statuses on result objects and never raised.
"""
from typing import Optional, Sequence


class SinkSourceError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(SinkSourceError, ValueError):
    """Invalid configuration value or file."""


class MeshError(SinkSourceError, ValueError):
    """Invalid domain descriptor, mesh file or mesh invariant violation."""


class AssemblyError(SinkSourceError, ValueError):
    """Conductivity sample that is not symmetric positive-definite."""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.point = None if point is None else tuple(float(p) for p in point)


class StateSolveError(SinkSourceError, RuntimeError):
    """Breakdown of the bordered state system."""

    def __init__(self, message: str, column: Optional[int] = None):
        if column is not None:
            message = f"{message} (frame column {column})"
        super().__init__(message)
        self.column = column


class SpectralError(SinkSourceError, ValueError):
    """Non-finite forward matrix or truncation level out of range."""


class WeightError(SpectralError):
    """A standard basis vector lies (numerically) in the null space of A."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class SolverError(SinkSourceError, RuntimeError):
    """Malformed solve request."""


class ExperimentError(SinkSourceError, RuntimeError):
    """Harness failure, annotated with the scenario that produced it."""

    def __init__(self, message: str, scenario: Optional[str] = None, alpha: Optional[float] = None):
        self.detail = message
        context = []
        if scenario is not None:
            context.append(f"scenario={scenario}")
        if alpha is not None:
            context.append(f"alpha={alpha:g}")
        if context:
            message = f"{message} [{', '.join(context)}]"
        super().__init__(message)
        self.scenario = scenario
        self.alpha = alpha
