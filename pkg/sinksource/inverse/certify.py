"""
Checkable recovery certificates for weighted l1 problems.

Every check is a pure function that returns a report; failing a check is an
outcome, never an exception. Throughout, Q = W^-1 P has columns
[W^-1 P e_j]_i = P_ij / w_i.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from sinksource.config.config_models import CertifyConfig
from sinksource.errors import WeightError
from sinksource.inverse.sources import SourceConfig
from sinksource.inverse.spectral import WeightMatrix

logger = logging.getLogger(__name__)

# Allowed excess of [W^-1 P e_j]_j over 1
MAX_VALUE_SLACK = 1e-10

# Condition number above which the sign system counts as singular
SINGULAR_COND = 1e12


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None or not np.isfinite(value):
        return None
    return float(value)


@dataclass
class ParallelColumnReport:
    """Pairs (i, j), i < j, of (anti)parallel columns and zero columns."""
    pairs: List[Tuple[int, int]]
    degenerate: List[int]

    @property
    def passed(self) -> bool:
        return not self.pairs and not self.degenerate

    def flagged(self) -> List[int]:
        """Every index involved in a violation."""
        hits = set(self.degenerate)
        for i, j in self.pairs:
            hits.update((i, j))
        return sorted(hits)


def check_parallel_columns(A: np.ndarray, angle_tol: float = 1e-9) -> ParallelColumnReport:
    """
    Scan all column pairs for |cos angle(A e_i, A e_j)| > 1 - angle_tol.

    An empty report certifies that no two standard basis vectors are mapped
    to parallel vectors. Zero columns are reported as degenerate and skipped.
    """
    A = np.asarray(A, dtype=float)
    norms = np.linalg.norm(A, axis=0)
    scale = norms.max() if norms.size else 0.0
    zero = norms <= np.finfo(float).eps * max(scale, np.finfo(float).tiny)
    degenerate = [int(j) for j in np.nonzero(zero)[0]]

    live = np.nonzero(~zero)[0]
    unit = A[:, live] / norms[live]
    cosines = np.abs(unit.T @ unit)
    i, j = np.nonzero(np.triu(cosines > 1.0 - angle_tol, k=1))
    pairs = [(int(live[a]), int(live[b])) for a, b in zip(i, j)]
    if pairs or degenerate:
        logger.info(f"Parallel-column scan: {len(pairs)} pair(s), {len(degenerate)} zero column(s)")
    return ParallelColumnReport(pairs=pairs, degenerate=degenerate)


@dataclass
class MaxPropertyReport:
    """
    Per-index outcome of the maximum property of W^-1 P.

    Attributes:
        passed: passed[j] is True when |[W^-1 P e_j]_i| peaks strictly at i = j
            with value ||P e_j|| <= 1
        margins: Peak value minus the largest off-diagonal magnitude
        values: [W^-1 P e_j]_j = ||P e_j||
        excluded: Indices left out of the guarantee (e.g. parallel columns)
    """
    passed: np.ndarray
    margins: np.ndarray
    values: np.ndarray
    excluded: List[int] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        keep = np.ones(len(self.passed), dtype=bool)
        keep[self.excluded] = False
        return bool(self.passed[keep].all())

    def failures(self) -> List[int]:
        keep = set(self.excluded)
        return [int(j) for j in np.nonzero(~self.passed)[0] if int(j) not in keep]


def check_max_property(P: np.ndarray, W: WeightMatrix,
                       exclude: Sequence[int] = ()) -> MaxPropertyReport:
    """
    Check that every column of W^-1 P attains its maximum magnitude on the diagonal.

    Args:
        P: Orthogonal projection
        W: Weights built from P
        exclude: Indices reported but not counted (hypothesis violations)
    """
    Q = np.asarray(P, dtype=float) / W.w[:, None]
    mags = np.abs(Q)
    values = np.diag(Q).copy()
    off = mags.copy()
    np.fill_diagonal(off, -np.inf)
    off_max = off.max(axis=0) if Q.shape[0] > 1 else np.zeros(Q.shape[1])
    margins = np.abs(values) - off_max
    passed = (margins > 0.0) & (values <= 1.0 + MAX_VALUE_SLACK)
    report = MaxPropertyReport(passed=passed, margins=margins, values=values,
                               excluded=sorted(int(j) for j in exclude))
    logger.debug(f"Max property: {int(passed.sum())}/{len(passed)} indices pass")
    return report


@dataclass
class DualCertificateReport:
    """Outcome of the dual certificate conditions for a vector c."""
    c: np.ndarray
    nbp1_residual: float
    nbp2_margin: float
    valid: bool


def _projection_norms(P: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(P, axis=0)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise WeightError(f"P e_{int(zero[0])} = 0", index=int(zero[0]))
    return norms


def verify_dual_certificate(P: np.ndarray, source: SourceConfig, c: np.ndarray,
                            residual_tol: float = 1e-8) -> DualCertificateReport:
    """
    Check (P e_i / ||P e_i||) . c = sgn(x*_i) on J and |.| < 1 off J.

    Args:
        P: Orthogonal projection
        source: True configuration
        c: Candidate certificate (length n)
        residual_tol: Accepted on-support residual
    """
    P = np.asarray(P, dtype=float)
    c = np.asarray(c, dtype=float)
    pairing = (P @ c) / _projection_norms(P)
    J, Jc = source.J, source.complement()
    residual = float(np.abs(pairing[J] - source.signs()).max()) if J.size else 0.0
    margin = float(np.abs(pairing[Jc]).max()) if Jc.size else 0.0
    valid = residual <= residual_tol and margin < 1.0
    return DualCertificateReport(c=c, nbp1_residual=residual, nbp2_margin=margin, valid=valid)


def disjoint_certificate(P: np.ndarray, source: SourceConfig) -> np.ndarray:
    """c = sum_J sgn(x*_j) P e_j / ||P e_j||, valid when the P e_j have disjoint supports."""
    P = np.asarray(P, dtype=float)
    norms = _projection_norms(P)
    J = source.J
    return P[:, J] @ (source.signs() / norms[J])


@dataclass
class CertificateReport:
    """
    Aggregated certificate outcome for one configuration.

    ``passed`` is set exactly when the sign system is solvable and c2_margin < 1.
    """
    support: List[int]
    c1_feasible: bool
    a: Optional[np.ndarray] = None
    c2_margin: Optional[float] = None
    passed: bool = False
    alpha_max: Optional[float] = None
    dual: Optional[DualCertificateReport] = None
    injective_on_support: Optional[bool] = None
    sigma_min: Optional[float] = None
    disjoint: Optional[bool] = None
    overlap: Optional[np.ndarray] = None
    ortho_norms: Dict[int, float] = field(default_factory=dict)
    parallel_pairs: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        """Sign system and off-support bound pass, the induced dual certificate is valid and A is injective on J."""
        dual_ok = self.dual is None or self.dual.valid
        return bool(self.passed and dual_ok and self.injective_on_support is not False)

    def to_dict(self) -> Dict:
        return {
            'support': list(self.support),
            'c1_feasible': self.c1_feasible,
            'a': None if self.a is None else [float(v) for v in self.a],
            'c2_margin': _finite_or_none(self.c2_margin),
            'passed': self.passed,
            'alpha_max': _finite_or_none(self.alpha_max),
            'nbp1_residual': None if self.dual is None else self.dual.nbp1_residual,
            'nbp2_margin': None if self.dual is None else self.dual.nbp2_margin,
            'dual_valid': None if self.dual is None else self.dual.valid,
            'injective_on_support': self.injective_on_support,
            'sigma_min': _finite_or_none(self.sigma_min),
            'disjoint': self.disjoint,
            'overlap': None if self.overlap is None else self.overlap.tolist(),
            'ortho_norms': {str(k): float(v) for k, v in self.ortho_norms.items()},
            'parallel_pairs': [list(p) for p in self.parallel_pairs],
            'certified': self.certified,
        }

    def render_table(self) -> str:
        """Plain-text pass/fail table."""
        def verdict(flag: Optional[bool]) -> str:
            return "n/a" if flag is None else ("PASS" if flag else "FAIL")

        def number(value: Optional[float]) -> str:
            return "-" if value is None else f"{value:.6g}"

        rows = [
            ("sign system solvable", verdict(self.c1_feasible), ""),
            ("off-support bound", verdict(self.passed if self.c1_feasible else None),
             f"margin {number(self.c2_margin)}"),
            ("dual certificate", verdict(None if self.dual is None else self.dual.valid),
             "" if self.dual is None else
             f"residual {number(self.dual.nbp1_residual)}, margin {number(self.dual.nbp2_margin)}"),
            ("injective on support", verdict(self.injective_on_support),
             f"sigma_min {number(self.sigma_min)}"),
            ("disjoint projections", verdict(self.disjoint), ""),
            ("no parallel columns in J", verdict(not self.parallel_pairs), ""),
            ("alpha_max", "", number(self.alpha_max)),
            ("certified", verdict(self.certified), ""),
        ]
        width = max(len(r[0]) for r in rows)
        lines = [f"{'check'.ljust(width)}  result  detail", "-" * (width + 24)]
        lines.extend(f"{name.ljust(width)}  {result.ljust(6)}  {detail}".rstrip() for name, result, detail in rows)
        return "\n".join(lines)


def alpha_bound(source: SourceConfig, a: np.ndarray) -> float:
    """
    Largest alpha keeping sgn(x*_j - alpha a_j) = sgn(x*_j) on J.

    Only positive ratios x*_j / a_j can flip a sign; with none the bound is infinite.
    """
    a = np.asarray(a, dtype=float)
    x = np.array(source.values)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = np.where(a != 0.0, x / a, np.inf)
    positive = ratios[ratios > 0.0]
    return float(positive.min()) if positive.size else float('inf')


def check_c1_c2(P: np.ndarray, W: WeightMatrix, source: SourceConfig,
                residual_tol: float = 1e-8) -> CertificateReport:
    """
    Solve the sign system M a = sgn(x*_J), M_ij = [W^-1 P e_j]_i (i, j in J),
    and bound v = sum_J a_j W^-1 P e_j off the support.

    The outcome depends on the signs of x* only. On a pass the induced dual
    certificate c = sum_J a_j e_j is verified as well.

    Args:
        P: Orthogonal projection
        W: Weights built from P
        source: True configuration (s >= 1)
        residual_tol: Tolerance for the induced dual certificate

    Returns:
        Partial certificate report (sign system, off-support bound, alpha_max, dual certificate)
    """
    if source.s < 1:
        raise ValueError("check_c1_c2 needs a nonempty support")
    P = np.asarray(P, dtype=float)
    J, Jc = source.J, source.complement()
    Q = P / W.w[:, None]
    M = Q[np.ix_(J, J)]
    report = CertificateReport(support=list(source.support), c1_feasible=False)

    try:
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > SINGULAR_COND:
            raise np.linalg.LinAlgError(f"condition number {cond:.3e}")
        a = scipy.linalg.solve(M, source.signs())
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        logger.info(f"sign system inconclusive for support {list(source.support)}: {e}")
        return report

    v = Q[:, J] @ a
    report.c1_feasible = True
    report.a = a
    report.c2_margin = float(np.abs(v[Jc]).max()) if Jc.size else 0.0
    report.passed = report.c2_margin < 1.0
    report.alpha_max = alpha_bound(source, a)
    if report.passed:
        c = np.zeros(P.shape[0])
        c[J] = a
        report.dual = verify_dual_certificate(P, source, c, residual_tol)
        if not report.dual.valid:
            logger.warning(f"sign system and off-support bound passed but the induced dual certificate failed "
                           f"(residual {report.dual.nbp1_residual:.3e})")
    return report


@dataclass
class DisjointReport:
    """Numerical supports of P e_j and their pairwise overlaps."""
    disjoint: bool
    overlap: np.ndarray
    supports: Dict[int, np.ndarray]


def check_disjoint_supports(P: np.ndarray, J: Sequence[int], supp_tol: float = 1e-3) -> DisjointReport:
    """
    Test whether the numerical supports {i : |[P e_j]_i| > supp_tol ||P e_j||_inf}
    are pairwise disjoint over j in J.

    The overlap matrix holds, per pair, the largest co-located magnitude
    min(|P_ij| / ||P e_j||_inf, |P_ik| / ||P e_k||_inf); the diagonal is zero.
    """
    P = np.asarray(P, dtype=float)
    J = [int(j) for j in J]
    cols = np.abs(P[:, J])
    peaks = cols.max(axis=0)
    rel = cols / np.where(peaks > 0.0, peaks, 1.0)
    masks = rel > supp_tol
    overlap = np.zeros((len(J), len(J)))
    disjoint = True
    for a in range(len(J)):
        for b in range(a + 1, len(J)):
            shared = masks[:, a] & masks[:, b]
            if shared.any():
                disjoint = False
                overlap[a, b] = overlap[b, a] = float(np.minimum(rel[shared, a], rel[shared, b]).max())
    supports = {j: np.nonzero(masks[:, a])[0] for a, j in enumerate(J)}
    return DisjointReport(disjoint=disjoint, overlap=overlap, supports=supports)


def check_orthocomplement(P: np.ndarray, j: int, ortho_tol: float = 0.05) -> Tuple[bool, float]:
    """
    Membership test e_j in the complement of the null space: ||P e_j|| >= 1 - ortho_tol.

    Returns:
        (flag, ||P e_j||); exact membership means the norm equals 1
    """
    norm = float(np.linalg.norm(np.asarray(P, dtype=float)[:, int(j)]))
    return norm >= 1.0 - ortho_tol, norm


def orthocomplement_members(P: np.ndarray, ortho_tol: float = 0.05,
                            candidates: Optional[Sequence[int]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Indices whose ||P e_j|| reaches 1 - ortho_tol.

    Returns:
        (member indices, all norms)
    """
    norms = np.linalg.norm(np.asarray(P, dtype=float), axis=0)
    pool = np.arange(len(norms)) if candidates is None else np.asarray(candidates, dtype=np.int64)
    members = pool[norms[pool] >= 1.0 - ortho_tol]
    return members, norms


@dataclass
class InjectivityReport:
    injective: bool
    sigma_min: float
    tol: float


def check_injective_on_support(A: np.ndarray, J: Sequence[int], inj_rel_tol: float = 1e-8) -> InjectivityReport:
    """
    Smallest singular value of the column submatrix A_J against inj_rel_tol * s_max(A).

    More columns than rows means sigma_min = 0.
    """
    A = np.asarray(A, dtype=float)
    J = [int(j) for j in J]
    if not J:
        raise ValueError("support must be nonempty")
    s_max = float(scipy.linalg.svdvals(A)[0]) if A.size else 0.0
    tol = inj_rel_tol * s_max
    if len(J) > A.shape[0]:
        sigma_min = 0.0
    else:
        sigma_min = float(scipy.linalg.svdvals(A[:, J])[-1])
    return InjectivityReport(injective=sigma_min > tol, sigma_min=sigma_min, tol=tol)


def check_sign_consistency(x: np.ndarray, source: SourceConfig, tau_supp: float) -> bool:
    """True iff every |x_k| > tau_supp carries the sign of x*_k."""
    x = np.asarray(x, dtype=float)
    if len(x) != source.n:
        raise ValueError(f"length mismatch: {len(x)} != {source.n}")
    truth = np.sign(source.dense())
    big = np.abs(x) > tau_supp
    return bool(np.all(np.sign(x[big]) == truth[big]))


def certify_configuration(A: np.ndarray, P: np.ndarray, W: WeightMatrix, source: SourceConfig,
                          config: Optional[CertifyConfig] = None) -> CertificateReport:
    """
    Run the full battery for one configuration.

    Args:
        A: Operator whose injectivity on J decides uniqueness
        P: Orthogonal projection the weights come from
        W: Weights
        source: True configuration
        config: Thresholds (defaults when omitted)

    Returns:
        Complete certificate report
    """
    config = config or CertifyConfig()
    report = check_c1_c2(P, W, source, config.residual_tol)
    injectivity = check_injective_on_support(A, source.support, config.inj_rel_tol)
    report.injective_on_support = injectivity.injective
    report.sigma_min = injectivity.sigma_min

    disjoint = check_disjoint_supports(P, source.support, config.supp_tol)
    report.disjoint = disjoint.disjoint
    report.overlap = disjoint.overlap
    report.ortho_norms = {j: check_orthocomplement(P, j, config.ortho_tol)[1] for j in source.support}
    parallel = check_parallel_columns(np.asarray(A)[:, source.J], config.angle_tol)
    report.parallel_pairs = [(source.support[i], source.support[j]) for i, j in parallel.pairs]

    logger.info(f"Certificate for support {list(source.support)}: "
                f"{'certified' if report.certified else 'not certified'} "
                f"(off-support margin {report.c2_margin}, sigma_min {report.sigma_min:.3g})")
    return report
