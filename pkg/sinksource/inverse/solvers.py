"""
Weighted l1 solvers.

Both solvers work on z = W x, so the penalty becomes the plain l1 norm and
the operator becomes G W^-1:

    basis pursuit:  min ||W x||_1            s.t. ||A x - b|| <= tol_feas ||b||   (ADMM + polishing)
    lasso:          min 1/2 ||G x - d||^2 + alpha ||W x||_1                       (FISTA with restart)
"""
import csv
import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from sinksource.config.config_models import SolverConfig
from sinksource.errors import SolverError
from sinksource.inverse.certify import alpha_bound, check_injective_on_support
from sinksource.inverse.sources import SourceConfig
from sinksource.inverse.spectral import SpectralModel, WeightMatrix, projection, weight_matrix

logger = logging.getLogger(__name__)

# Iterations between optimality checks
CHECK_EVERY = 10

# Relative support threshold used when tau_supp is not given
SUPPORT_REL_TOL = 1e-6

FORMULATIONS = ('projected', 'formA', 'formAd')


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    STALLED = "stalled"
    INFEASIBLE = "infeasible"


@dataclass
class Tolerances:
    primal_tol: float = 1e-10
    dual_tol: float = 1e-8
    max_iter: int = 200000
    tol_feas: float = 1e-9

    @classmethod
    def from_config(cls, config: SolverConfig) -> 'Tolerances':
        return cls(primal_tol=config.primal_tol, dual_tol=config.dual_tol,
                   max_iter=config.max_iter, tol_feas=config.tol_feas)


def extract_support(x: np.ndarray, tau_supp: Optional[float] = None) -> np.ndarray:
    """
    Indices with |x_i| > tau_supp (default 1e-6 ||x||_inf).

    Raises:
        SolverError: If an explicit threshold is not positive
    """
    x = np.asarray(x, dtype=float)
    if tau_supp is None:
        peak = float(np.abs(x).max()) if x.size else 0.0
        if peak == 0.0:
            return np.array([], dtype=np.int64)
        tau_supp = SUPPORT_REL_TOL * peak
    elif tau_supp <= 0:
        raise SolverError(f"tau_supp must be positive, got {tau_supp}")
    return np.nonzero(np.abs(x) > tau_supp)[0]


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@dataclass
class SolveRequest:
    """
    Regularized problem min 1/2 ||G x - d||^2 + alpha ||W x||_1.

    alpha = 0 asks for the basis pursuit problem on (G, d).
    """
    operator: np.ndarray
    data: np.ndarray
    weights: WeightMatrix
    alpha: float
    tolerances: Tolerances = field(default_factory=Tolerances)
    x0: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        self.operator = np.atleast_2d(np.asarray(self.operator, dtype=float))
        self.data = np.atleast_1d(np.asarray(self.data, dtype=float))
        if self.alpha < 0 or not np.isfinite(self.alpha):
            raise SolverError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.operator.shape[1] != self.weights.n:
            raise SolverError(f"operator has {self.operator.shape[1]} columns "
                              f"but {self.weights.n} weights were given")
        if self.operator.shape[0] != len(self.data):
            raise SolverError(f"operator has {self.operator.shape[0]} rows "
                              f"but data has length {len(self.data)}")
        if self.x0 is not None and len(self.x0) != self.weights.n:
            raise SolverError("x0 length does not match the operator")

    def objective(self, x: np.ndarray) -> float:
        r = self.operator @ x - self.data
        return 0.5 * float(r @ r) + self.alpha * self.weights.l1(x)


@dataclass
class SolveResult:
    """Solver outcome; ``history`` holds the objective of the reported iterates."""
    x: np.ndarray
    objective: float
    residual_norm: float
    iterations: int
    converged: bool
    status: SolveStatus
    history: List[float] = field(default_factory=list, repr=False)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def support(self, tau_supp: Optional[float] = None) -> np.ndarray:
        return extract_support(self.x, tau_supp)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'x': [float(v) for v in self.x],
            'objective': float(self.objective),
            'residual_norm': float(self.residual_norm),
            'iterations': int(self.iterations),
            'converged': bool(self.converged),
            'status': self.status.value,
            'support': [int(i) for i in self.support()],
            'metadata': self.metadata,
        }

    def write_trace(self, path: str) -> None:
        """Dump the objective history as CSV (iteration, objective)."""
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['iteration', 'objective'])
            for i, value in enumerate(self.history):
                writer.writerow([i, repr(float(value))])


def _optimality_residual(grad: np.ndarray, z: np.ndarray, alpha: float) -> float:
    """Distance of -grad to alpha * subdifferential of ||z||_1, in the max norm."""
    on = z != 0.0
    r = np.empty_like(z)
    r[on] = np.abs(grad[on] + alpha * np.sign(z[on]))
    r[~on] = np.maximum(np.abs(grad[~on]) - alpha, 0.0)
    return float(r.max()) if r.size else 0.0


def _lasso_polish(B: np.ndarray, d: np.ndarray, z: np.ndarray, alpha: float) -> Optional[np.ndarray]:
    """Solve the stationarity conditions on the support of z with its signs held fixed."""
    support = np.nonzero(z)[0]
    if support.size == 0 or support.size > B.shape[0]:
        return None
    signs = np.sign(z[support])
    Bs = B[:, support]
    coef, *_ = scipy.linalg.lstsq(Bs.T @ Bs, Bs.T @ d - alpha * signs)
    if np.any(np.sign(coef) != signs):
        return None
    polished = np.zeros_like(z)
    polished[support] = coef
    return polished


def solve_weighted_lasso(req: SolveRequest) -> SolveResult:
    """
    Accelerated proximal gradient on z = W x with step 1/L, L = s_max(G W^-1)^2.

    An objective increase triggers a restart: the momentum is reset and a
    plain proximal step from the last iterate is taken instead, so reported
    objectives never increase beyond rounding. When even that step cannot
    descend, the support of the iterate is polished and the optimality
    residual decides between CONVERGED and STALLED.

    Args:
        req: Request with alpha > 0

    Returns:
        Solve result with the last iterate; MAX_ITER when the iteration
        budget runs out, STALLED when no descent is left but the optimality
        residual still exceeds dual_tol
    """
    if req.alpha <= 0:
        raise SolverError("solve_weighted_lasso needs alpha > 0; use solve_weighted_bp for alpha = 0")
    tol = req.tolerances
    w = req.weights.w
    B = req.operator / w
    d = req.data
    alpha = req.alpha
    L = float(np.linalg.norm(B, 2)) ** 2 if B.size else 0.0

    def objective(z: np.ndarray) -> float:
        r = B @ z - d
        return 0.5 * float(r @ r) + alpha * float(np.abs(z).sum())

    z = np.zeros(B.shape[1]) if req.x0 is None else w * np.asarray(req.x0, dtype=float)
    if L == 0.0:
        z = np.zeros_like(z)
        x = z / w
        return SolveResult(x=x, objective=objective(z), residual_norm=float(np.linalg.norm(d)),
                           iterations=0, converged=True, status=SolveStatus.CONVERGED,
                           history=[objective(z)], metadata={'lipschitz': 0.0, 'label': req.label})

    step = 1.0 / L
    y = z.copy()
    t = 1.0
    f_old = objective(z)
    history = [f_old]
    restarts = 0
    stagnated = False
    converged = False
    status = SolveStatus.MAX_ITER
    it = 0

    for it in range(1, tol.max_iter + 1):
        z_new = soft_threshold(y - step * (B.T @ (B @ y - d)), alpha * step)
        f_new = objective(z_new)
        if f_new > f_old:
            restarts += 1
            z_new = soft_threshold(z - step * (B.T @ (B @ z - d)), alpha * step)
            f_new = objective(z_new)
            t = 1.0
            if f_new > f_old:
                # No descent left at working precision
                z_new, f_new = z, f_old
                stagnated = True
            y = z_new.copy()
            restarted = True
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = z_new + ((t - 1.0) / t_new) * (z_new - z)
            t = t_new
            restarted = False

        change = float(np.linalg.norm(z_new - z))
        z, f_old = z_new, f_new
        history.append(f_new)

        if stagnated:
            polished = _lasso_polish(B, d, z, alpha)
            if polished is not None and _optimality_residual(B.T @ (B @ polished - d), polished, alpha) <= tol.dual_tol:
                z, f_old = polished, objective(polished)
                history.append(f_old)
            converged = _optimality_residual(B.T @ (B @ z - d), z, alpha) <= tol.dual_tol
            status = SolveStatus.CONVERGED if converged else SolveStatus.STALLED
            break
        if not restarted and change <= tol.primal_tol * float(np.linalg.norm(z)):
            converged = True
        elif it % CHECK_EVERY == 0:
            residual = _optimality_residual(B.T @ (B @ z - d), z, alpha)
            converged = residual <= tol.dual_tol
        if converged:
            status = SolveStatus.CONVERGED
            break
        if it % 10000 == 0:
            logger.debug(f"lasso[{req.label}] iteration {it}: objective {f_new:.12g}, change {change:.3e}")

    x = z / w
    residual_norm = float(np.linalg.norm(req.operator @ x - d))
    result = SolveResult(
        x=x, objective=f_old, residual_norm=residual_norm, iterations=it,
        converged=converged, status=status, history=history,
        metadata={'lipschitz': L, 'restarts': restarts, 'alpha': alpha,
                  'optimality_residual': _optimality_residual(B.T @ (B @ z - d), z, alpha),
                  'label': req.label})
    if not converged:
        logger.warning(f"lasso[{req.label}] stopped after {it} iterations without converging "
                       f"({status.value}, objective {f_old:.6g})")
    else:
        logger.debug(f"lasso[{req.label}] converged in {it} iterations, {restarts} restart(s)")
    return result


def _bp_dual_check(B: np.ndarray, b: np.ndarray, z: np.ndarray, support: np.ndarray,
                   candidates: Sequence[np.ndarray], dual_tol: float) -> Optional[Dict[str, float]]:
    """
    Look for y with B_S^T y = sgn(z_S) and |B^T y| <= 1 off S, and a small duality gap.

    Returns:
        Dual diagnostics when some candidate certifies optimality, else None
    """
    signs = np.sign(z[support])
    off = np.setdiff1d(np.arange(B.shape[1]), support)
    primal = float(np.abs(z).sum())
    for y in candidates:
        g = B.T @ y
        on_res = float(np.abs(g[support] - signs).max()) if support.size else 0.0
        off_max = float(np.abs(g[off]).max()) if off.size else 0.0
        gap = abs(primal - float(b @ y))
        if on_res <= dual_tol and off_max <= 1.0 + dual_tol and gap <= dual_tol * max(1.0, primal):
            return {'dual_residual': on_res, 'dual_off_support': off_max, 'duality_gap': gap}
    return None


def _polish(B: np.ndarray, b: np.ndarray, z: np.ndarray, tol_feas: float) -> Optional[np.ndarray]:
    """Least squares on the support of z, kept when feasible and sign-preserving."""
    support = extract_support(z)
    if support.size == 0 or support.size > B.shape[0]:
        return None
    coef, *_ = scipy.linalg.lstsq(B[:, support], b)
    if np.linalg.norm(B[:, support] @ coef - b) > tol_feas * np.linalg.norm(b):
        return None
    if np.any(np.sign(coef) != np.sign(z[support])):
        return None
    polished = np.zeros_like(z)
    polished[support] = coef
    return polished


def solve_weighted_bp(A: np.ndarray, W: WeightMatrix, b: np.ndarray,
                      tol: Optional[Tolerances] = None, rho: float = 1.0,
                      label: str = "") -> SolveResult:
    """
    Weighted basis pursuit min ||W x||_1 s.t. ||A x - b|| <= tol_feas ||b||.

    ADMM on z = W x (projection onto {B z = b}, soft threshold, dual ascent)
    with residual balancing of rho. The support of the iterate is polished
    by least squares and accepted once a dual certificate with a small
    duality gap confirms optimality. Uniqueness is flagged through the
    injectivity of A on the recovered support.

    Args:
        A: (m, n) operator
        W: Weights
        b: (m,) data
        tol: Tolerances
        rho: Initial ADMM penalty
        label: Tag for logs and metadata

    Returns:
        Solve result; INFEASIBLE when b is outside the numerical range of A
    """
    tol = tol or Tolerances()
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    if A.shape[1] != W.n or A.shape[0] != len(b):
        raise SolverError(f"shape mismatch: A {A.shape}, {W.n} weights, data {len(b)}")
    w = W.w
    B = A / w
    n = B.shape[1]
    norm_b = float(np.linalg.norm(b))

    if norm_b == 0.0:
        return SolveResult(x=np.zeros(n), objective=0.0, residual_norm=0.0, iterations=0,
                           converged=True, status=SolveStatus.CONVERGED, history=[0.0],
                           metadata={'label': label, 'unique': True})

    B_pinv = scipy.linalg.pinv(B)
    range_defect = float(np.linalg.norm(B @ (B_pinv @ b) - b))
    if range_defect > tol.tol_feas * norm_b:
        x_ls = (B_pinv @ b) / w
        logger.warning(f"bp[{label}] data outside the range of A (defect {range_defect:.3e})")
        return SolveResult(x=x_ls, objective=W.l1(x_ls), residual_norm=range_defect, iterations=0,
                           converged=False, status=SolveStatus.INFEASIBLE, history=[],
                           metadata={'label': label, 'range_defect': range_defect})

    def project(v: np.ndarray) -> np.ndarray:
        return v - B_pinv @ (B @ v - b)

    z = B_pinv @ b
    u = np.zeros(n)
    best = float(np.abs(z).sum())
    history = [best]
    eps_abs, eps_rel = tol.primal_tol, tol.dual_tol
    status = SolveStatus.MAX_ITER
    converged = False
    dual_info: Optional[Dict[str, float]] = None
    polished: Optional[np.ndarray] = None
    it = 0

    for it in range(1, tol.max_iter + 1):
        v = project(z - u)
        best = min(best, float(np.abs(v).sum()))
        history.append(best)
        z_old = z
        z = soft_threshold(v + u, 1.0 / rho)
        u = u + v - z

        if it % CHECK_EVERY == 0:
            polished = _polish(B, b, z, tol.tol_feas)
            if polished is not None:
                support = extract_support(polished)
                y_min = scipy.linalg.lstsq(B[:, support].T, np.sign(polished[support]))[0]
                y_admm = B_pinv.T @ (rho * u)
                dual_info = _bp_dual_check(B, b, polished, support, (y_min, y_admm), eps_rel)
                if dual_info is not None:
                    z = polished
                    converged = True
                    status = SolveStatus.CONVERGED
                    break

        r_norm = float(np.linalg.norm(v - z))
        s_norm = rho * float(np.linalg.norm(z - z_old))
        eps_pri = np.sqrt(n) * eps_abs + eps_rel * max(np.linalg.norm(v), np.linalg.norm(z))
        eps_dual = np.sqrt(n) * eps_abs + eps_rel * rho * np.linalg.norm(u)
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            status = SolveStatus.CONVERGED
            polished = _polish(B, b, z, tol.tol_feas)
            if polished is not None and np.abs(polished).sum() <= np.abs(z).sum() + eps_rel * max(1.0, best):
                z = polished
            else:
                z = project(z)
            break

        # Residual balancing; the scaled dual follows rho
        if r_norm > 10.0 * s_norm:
            rho *= 2.0
            u = u / 2.0
        elif s_norm > 10.0 * r_norm:
            rho /= 2.0
            u = u * 2.0

    if not converged:
        polished = _polish(B, b, z, tol.tol_feas)
        z = polished if polished is not None else project(z)
        logger.warning(f"bp[{label}] reached {tol.max_iter} iterations without converging")

    x = z / w
    objective = float(np.abs(z).sum())
    history.append(min(history[-1], objective) if history else objective)
    residual_norm = float(np.linalg.norm(A @ x - b))
    support = extract_support(x)
    metadata: Dict[str, Any] = {'label': label, 'rho': rho}
    if dual_info:
        metadata.update(dual_info)
    if support.size:
        metadata['unique'] = bool(check_injective_on_support(A, support).injective)
        if not metadata['unique']:
            logger.warning(f"bp[{label}] A is not injective on the recovered support; "
                           f"the solution may not be unique")
    return SolveResult(x=x, objective=objective, residual_norm=residual_norm, iterations=it,
                       converged=converged, status=status, history=history, metadata=metadata)


def solve(req: SolveRequest) -> SolveResult:
    """Dispatch to basis pursuit (alpha = 0) or the weighted lasso."""
    if req.alpha == 0:
        return solve_weighted_bp(req.operator, req.weights, req.data, req.tolerances, label=req.label)
    return solve_weighted_lasso(req)


@dataclass
class PredictedSolution:
    """Closed-form regularized solution y = sum_J (x*_j - alpha a_j) e_j."""
    y: np.ndarray
    alpha_max: float
    in_regime: bool


def predicted_solution(source: SourceConfig, a: np.ndarray, alpha: float) -> PredictedSolution:
    """
    Closed-form solution predicted by the certificate coefficients a.

    Args:
        source: True configuration
        a: Solution of the sign system on J (length s)
        alpha: Regularization weight

    Returns:
        y, alpha_max and whether alpha < alpha_max (signs preserved on J)
    """
    a = np.asarray(a, dtype=float)
    if len(a) != source.s:
        raise SolverError(f"expected {source.s} certificate coefficients, got {len(a)}")
    y = np.zeros(source.n)
    y[source.J] = np.array(source.values) - alpha * a
    alpha_max = alpha_bound(source, a)
    in_regime = alpha < alpha_max
    if not in_regime:
        logger.warning(f"alpha={alpha:g} >= alpha_max={alpha_max:g}: prediction leaves the sign-preserving regime")
    return PredictedSolution(y=y, alpha_max=alpha_max, in_regime=in_regime)


def build_request(spectral: SpectralModel, formulation: str, data: np.ndarray, alpha: float,
                  k: Optional[int] = None, weights: Optional[WeightMatrix] = None,
                  tolerances: Optional[Tolerances] = None, x0: Optional[np.ndarray] = None,
                  label: str = "") -> SolveRequest:
    """
    Assemble the request for one of the regularized formulations.

        projected: 1/2 ||P_k x - P_k x*||^2         data = x*
        formAd:    1/2 ||A_k^+ A x - A_k^+ b||^2    data = b
        formA:     1/2 ||A x - b||^2                data = b

    The projected fidelities are evaluated in the coordinates of V_k
    (G = V_k^T), which leaves objective and residual norm unchanged.
    Weights default to those of P_k.
    """
    if formulation not in FORMULATIONS:
        raise SolverError(f"unknown formulation '{formulation}', expected one of {FORMULATIONS}")
    k = spectral.k if k is None else k
    data = np.asarray(data, dtype=float)
    if weights is None:
        weights = weight_matrix(projection(spectral, k))
    Vk_t = spectral.range_basis(k)
    if formulation == 'projected':
        G, d = Vk_t, Vk_t @ data
    elif formulation == 'formAd':
        G, d = Vk_t, spectral.projected_data(data, k)
    else:
        G, d = spectral.matrix, data
    return SolveRequest(operator=G, data=d, weights=weights, alpha=alpha,
                        tolerances=tolerances or Tolerances(), x0=x0, label=label or formulation)
