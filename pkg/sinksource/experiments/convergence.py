"""
Convergence-rate study for alpha = C * delta.

For each noise norm delta the clean data is perturbed by a noise vector of
norm exactly delta, the chosen formulation is solved with alpha = C * delta
and the error ||x_alpha - x*||_W is recorded. A least-squares line through
(log delta, log error) gives the observed rate.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from sinksource.errors import ExperimentError
from sinksource.experiments.noise import make_rng, scaled_noise
from sinksource.inverse.solvers import Tolerances, build_request, solve_weighted_lasso
from sinksource.inverse.sources import SourceConfig
from sinksource.inverse.spectral import SpectralModel, WeightMatrix, projection, weight_matrix

logger = logging.getLogger(__name__)

DEFAULT_DELTAS = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4)


@dataclass
class ConvergenceRecord:
    delta: float
    alpha: float
    error_w: float
    formulation: str
    converged: bool = True
    iterations: int = 0

    def to_dict(self) -> Dict:
        return {'delta': self.delta, 'alpha': self.alpha, 'error_w': self.error_w,
                'formulation': self.formulation, 'converged': self.converged,
                'iterations': self.iterations}


@dataclass
class ConvergenceStudy:
    """
    Records (delta descending) and the loglog fit over the usable ones.

    Attributes:
        records: One row per delta
        slope: Fitted rate
        intercept: Fitted log-constant
        r_squared: Coefficient of determination of the fit
        residuals: Fit residuals per used record
        stability: ||A_k^+|| for the truncated formulation, else None
    """
    formulation: str
    constant: float
    records: List[ConvergenceRecord]
    slope: float
    intercept: float
    r_squared: float
    residuals: List[float] = field(default_factory=list)
    stability: Optional[float] = None

    def to_dict(self) -> Dict:
        return {'formulation': self.formulation, 'constant': self.constant, 'slope': self.slope,
                'intercept': self.intercept, 'r_squared': self.r_squared,
                'residuals': self.residuals, 'stability': self.stability,
                'records': [r.to_dict() for r in self.records]}


def fit_loglog(deltas: Sequence[float], errors: Sequence[float]):
    """Least-squares line log(error) = slope * log(delta) + intercept."""
    x = np.log(np.asarray(deltas, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    residuals = y - fitted
    total = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 - float((residuals ** 2).sum()) / total if total > 0 else 1.0
    return float(slope), float(intercept), r_squared, [float(r) for r in residuals]


def convergence_study(spectral: SpectralModel, source: SourceConfig, constant: float,
                      deltas: Sequence[float] = DEFAULT_DELTAS, formulation: str = 'formA',
                      k: Optional[int] = None, weights: Optional[WeightMatrix] = None,
                      clean_data: Optional[np.ndarray] = None, seed: int = 0,
                      fixed_direction: bool = False,
                      tolerances: Optional[Tolerances] = None) -> ConvergenceStudy:
    """
    Solve formA or formAd with alpha = C * delta over a range of noise norms.

    Args:
        spectral: Decomposition of the forward matrix A
        source: True configuration
        constant: C in alpha = C * delta
        deltas: Noise norms, at least four spanning two decades
        formulation: 'formA' or 'formAd'
        k: Truncation level for weights and formAd (defaults to the model's)
        weights: Weights (default: from P_k)
        clean_data: Exact data (default A x*)
        seed: Generator seed
        fixed_direction: Reuse one noise direction for every delta
        tolerances: Solver tolerances

    Returns:
        The study; non-converged records are kept but left out of the fit
    """
    if formulation not in ('formA', 'formAd'):
        raise ExperimentError(f"convergence study supports formA and formAd, not '{formulation}'")
    deltas = sorted((float(d) for d in deltas), reverse=True)
    if len(deltas) < 4 or min(deltas) <= 0 or np.log10(deltas[0] / deltas[-1]) < 2.0 - 1e-12:
        raise ExperimentError("need at least four positive deltas spanning two decades")
    if constant <= 0:
        raise ExperimentError(f"C must be positive, got {constant}")

    k = spectral.k if k is None else k
    weights = weights or weight_matrix(projection(spectral, k))
    x_true = source.dense()
    b_clean = spectral.matrix @ x_true if clean_data is None else np.asarray(clean_data, dtype=float)
    rng = make_rng(seed)
    direction = rng.standard_normal(len(b_clean)) if fixed_direction else None

    records: List[ConvergenceRecord] = []
    x0 = None
    for delta in deltas:
        noise = scaled_noise(len(b_clean), delta, rng, direction)
        alpha = constant * delta
        req = build_request(spectral, formulation, b_clean + noise, alpha, k=k, weights=weights,
                            tolerances=tolerances, x0=x0, label=f"{formulation}@{delta:g}")
        result = solve_weighted_lasso(req)
        x0 = result.x
        error = weights.norm_w(result.x - x_true)
        records.append(ConvergenceRecord(delta=delta, alpha=alpha, error_w=error, formulation=formulation,
                                         converged=result.converged, iterations=result.iterations))
        logger.debug(f"{formulation} delta={delta:g} alpha={alpha:g} error_W={error:.4e}")

    usable = [r for r in records if r.converged and r.error_w > 0 and np.isfinite(r.error_w)]
    excluded = len(records) - len(usable)
    if excluded:
        logger.warning(f"{excluded} record(s) excluded from the {formulation} fit "
                       f"(non-converged or zero error)")
    if len(usable) < 2:
        raise ExperimentError(f"only {len(usable)} usable record(s) for the {formulation} fit")

    slope, intercept, r_squared, residuals = fit_loglog([r.delta for r in usable], [r.error_w for r in usable])
    stability = spectral.pinv_norm(k) if formulation == 'formAd' else None
    logger.info(f"{formulation} convergence: slope {slope:.3f}, R^2 {r_squared:.3f}"
                + (f", ||A_k^+|| = {stability:.3e}" if stability is not None else ""))
    return ConvergenceStudy(formulation=formulation, constant=constant, records=records, slope=slope,
                            intercept=intercept, r_squared=r_squared, residuals=residuals,
                            stability=stability)
