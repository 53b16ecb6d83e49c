"""
SVD of the forward matrix, truncated pseudo-inverse, projection and weights.

With A = U S V^T and truncation level k:

    A_k^+ b = sum_{i<=k} s_i^-1 v_i (u_i . b)
    P_k     = V_k V_k^T
    w_i     = ||P_k e_i||_2 = sqrt((P_k)_ii)
"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from sinksource.errors import SpectralError, WeightError

logger = logging.getLogger(__name__)

# Reconstruction check ||A - U S V^T|| <= RECONSTRUCTION_TOL * s_max
RECONSTRUCTION_TOL = 1e-10

# Symmetry/idempotence tolerance for projections passed to weight_matrix
PROJECTION_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """
    Thin SVD of A with an active truncation level.

    Attributes:
        matrix: The decomposed matrix A (m, n)
        U: (m, r) left singular vectors
        singular_values: (r,) nonincreasing singular values
        Vt: (r, n) right singular vectors as rows
        rank: Numerical rank #{s_i > rank_tol * s_max}
        rank_tol: Relative rank threshold
        k: Active truncation level (defaults to the rank)
    """
    matrix: np.ndarray
    U: np.ndarray
    singular_values: np.ndarray
    Vt: np.ndarray
    rank: int
    rank_tol: float
    k: int

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def __repr__(self):
        return (f"SpectralModel(shape={self.shape}, rank={self.rank}, k={self.k}, "
                f"s_max={self.singular_values[0] if len(self.singular_values) else 0.0:.4g})")

    def _level(self, k: Optional[int]) -> int:
        k = self.k if k is None else int(k)
        if k < 1 or k > self.rank:
            raise SpectralError(f"truncation level {k} outside [1, {self.rank}] (numerical rank)")
        return k

    def with_truncation(self, k: int) -> 'SpectralModel':
        """Copy of the model with a different active truncation level."""
        return dataclasses.replace(self, k=self._level(k))

    def range_basis(self, k: Optional[int] = None) -> np.ndarray:
        """V_k^T, the (k, n) orthonormal basis of the truncated row space."""
        return self.Vt[:self._level(k)]

    def apply_pinv(self, b: np.ndarray, k: Optional[int] = None) -> np.ndarray:
        return apply_pinv(self, self.k if k is None else k, b)

    def projected_data(self, b: np.ndarray, k: Optional[int] = None) -> np.ndarray:
        """Coordinates S_k^-1 U_k^T b of A_k^+ b in the basis V_k."""
        k = self._level(k)
        return (self.U[:, :k].T @ np.asarray(b, dtype=float)) / _column(self.singular_values[:k], b)

    def projection(self, k: Optional[int] = None) -> np.ndarray:
        return projection(self, self.k if k is None else k)

    def pinv_norm(self, k: Optional[int] = None) -> float:
        """||A_k^+||_2 = 1 / s_k."""
        return float(1.0 / self.singular_values[self._level(k) - 1])


def _column(values: np.ndarray, like: np.ndarray) -> np.ndarray:
    """Broadcast a per-row divisor against a vector or a matrix right-hand side."""
    return values if np.ndim(like) == 1 else values[:, None]


def decompose(A: np.ndarray, rank_tol: float = 1e-10, k: Optional[int] = None) -> SpectralModel:
    """
    Thin SVD of A.

    Args:
        A: Dense (m, n) matrix
        rank_tol: Relative threshold for the numerical rank
        k: Initial truncation level (defaults to the numerical rank)

    Returns:
        The spectral model

    Raises:
        SpectralError: On non-finite entries, a failed reconstruction check or k out of range
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise SpectralError(f"expected a matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise SpectralError("forward matrix contains non-finite entries")

    U, s, Vt = scipy.linalg.svd(A, full_matrices=False)
    s_max = float(s[0]) if s.size else 0.0
    rank = int(np.count_nonzero(s > rank_tol * s_max)) if s_max > 0 else 0

    defect = np.linalg.norm(A - (U * s) @ Vt, 2) if A.size else 0.0
    if defect > RECONSTRUCTION_TOL * max(s_max, np.finfo(float).tiny):
        raise SpectralError(f"SVD reconstruction defect {defect:.3e} exceeds tolerance")

    model = SpectralModel(matrix=A, U=U, singular_values=s, Vt=Vt, rank=rank,
                          rank_tol=rank_tol, k=rank)
    if k is not None:
        model = model.with_truncation(k)
    logger.info(f"Decomposed {A.shape[0]}x{A.shape[1]} matrix: numerical rank {rank}, k={model.k}")
    return model


def apply_pinv(spec: SpectralModel, k: int, b: np.ndarray) -> np.ndarray:
    """
    Truncated pseudo-inverse A_k^+ applied to a vector or to matrix columns.

    Raises:
        SpectralError: If k exceeds the numerical rank
    """
    k = spec._level(k)
    b = np.asarray(b, dtype=float)
    coeffs = (spec.U[:, :k].T @ b) / _column(spec.singular_values[:k], b)
    return spec.Vt[:k].T @ coeffs


def projection(spec: SpectralModel, k: int) -> np.ndarray:
    """
    Orthogonal projection P_k = V_k V_k^T onto the truncated row space.

    Raises:
        SpectralError: If k exceeds the numerical rank
    """
    Vk = spec.range_basis(k)
    P = Vk.T @ Vk
    return 0.5 * (P + P.T)


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """
    Diagonal weight matrix W = diag(w).

    Attributes:
        w: Positive diagonal entries
        floor_tol: Minimum admissible entry
    """
    w: np.ndarray
    floor_tol: float = 1e-8

    @classmethod
    def identity(cls, n: int) -> 'WeightMatrix':
        return cls(np.ones(n))

    @property
    def n(self) -> int:
        return len(self.w)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.w * np.asarray(x, dtype=float)

    def inverse_apply(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) / self.w

    def l1(self, x: np.ndarray) -> float:
        """||W x||_1"""
        return float(np.abs(self.apply(x)).sum())

    def norm_w(self, x: np.ndarray) -> float:
        """||x||_W = ||W x||_2"""
        return float(np.linalg.norm(self.apply(x)))

    def dense(self) -> np.ndarray:
        return np.diag(self.w)


def weight_matrix(P: np.ndarray, floor_tol: float = 1e-8) -> WeightMatrix:
    """
    Weights w_i = ||P e_i||_2 of an orthogonal projection.

    Args:
        P: Symmetric idempotent (n, n) matrix
        floor_tol: Smallest admissible weight

    Returns:
        The weight matrix

    Raises:
        SpectralError: If P is not a projection within tolerance
        WeightError: If some e_i lies in the null space (w_i < floor_tol);
            the error carries the 0-based index
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise SpectralError(f"projection must be square, got shape {P.shape}")
    if np.abs(P - P.T).max() > PROJECTION_TOL:
        raise SpectralError("projection is not symmetric")
    if np.abs(P @ P - P).max() > PROJECTION_TOL:
        raise SpectralError("projection is not idempotent")

    w = np.sqrt(np.clip(np.diag(P), 0.0, None))
    small = np.nonzero(w < floor_tol)[0]
    if small.size:
        i = int(small[0])
        raise WeightError(f"weight w_{i} = {w[i]:.3e} below floor {floor_tol:g}: standard basis "
                          f"vector e_{i} lies in the null space", index=i)
    logger.debug(f"Weights in [{w.min():.4g}, {w.max():.4g}]")
    return WeightMatrix(w=w, floor_tol=floor_tol)
