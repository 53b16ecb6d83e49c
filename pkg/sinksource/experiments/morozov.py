"""
Morozov's discrepancy principle over a logarithmic alpha grid.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from sinksource.errors import ExperimentError
from sinksource.inverse.solvers import SolveResult

logger = logging.getLogger(__name__)

DEFAULT_ETA = 1.1


def log_grid(alpha_min: float, alpha_max: float, points_per_decade: int = 25) -> np.ndarray:
    """Logarithmic grid from alpha_max down to alpha_min (inclusive)."""
    if not 0 < alpha_min < alpha_max:
        raise ExperimentError(f"need 0 < alpha_min < alpha_max, got {alpha_min}, {alpha_max}")
    decades = np.log10(alpha_max / alpha_min)
    count = max(2, int(np.ceil(decades * points_per_decade)) + 1)
    return np.logspace(np.log10(alpha_max), np.log10(alpha_min), count)


@dataclass
class MorozovResult:
    """
    Selected regularization weight.

    Attributes:
        alpha: Selected alpha
        result: Solution at the selected alpha
        fallback: True when no grid point met the discrepancy bound
        threshold: eta * delta
        scanned: (alpha, residual_norm) pairs in scan order
    """
    alpha: float
    result: SolveResult
    fallback: bool
    threshold: float
    scanned: List[Tuple[float, float]] = field(default_factory=list)


def morozov_select_alpha(solve: Callable[[float, Optional[np.ndarray]], SolveResult],
                         b_delta: np.ndarray, delta: float, alpha_grid: Sequence[float],
                         eta: float = DEFAULT_ETA) -> MorozovResult:
    """
    Largest grid alpha whose solution has fidelity residual <= eta * delta.

    The grid is scanned from the largest alpha down, warm-starting every
    solve from the previous solution.

    Args:
        solve: Callable (alpha, x0) -> SolveResult whose residual_norm is the
            fidelity residual of the formulation being solved
        b_delta: Noisy data (kept for the record)
        delta: Noise norm in the space the residual is measured in
        alpha_grid: Candidate weights (any order)
        eta: Safety factor

    Returns:
        Selection; falls back to the smallest alpha with ``fallback`` set

    Raises:
        ExperimentError: Empty grid, delta <= 0, or a solver failure (alpha attached)
    """
    grid = sorted((float(a) for a in alpha_grid), reverse=True)
    if not grid:
        raise ExperimentError("alpha grid is empty")
    if delta <= 0:
        raise ExperimentError(f"delta must be positive, got {delta}")

    threshold = eta * delta
    scanned: List[Tuple[float, float]] = []
    x0: Optional[np.ndarray] = None
    result: Optional[SolveResult] = None
    for alpha in grid:
        try:
            result = solve(alpha, x0)
        except Exception as e:
            raise ExperimentError(f"solver failed during Morozov scan: {e}", alpha=alpha) from e
        scanned.append((alpha, result.residual_norm))
        if result.residual_norm <= threshold:
            logger.info(f"Morozov selected alpha={alpha:.4g} (residual {result.residual_norm:.4e} "
                        f"<= {threshold:.4e}) after {len(scanned)} solve(s)")
            return MorozovResult(alpha=alpha, result=result, fallback=False,
                                 threshold=threshold, scanned=scanned)
        x0 = result.x

    logger.warning(f"Morozov: no alpha met residual <= {threshold:.4e}; "
                   f"falling back to alpha={grid[-1]:.4g}")
    return MorozovResult(alpha=grid[-1], result=result, fallback=True, threshold=threshold, scanned=scanned)
