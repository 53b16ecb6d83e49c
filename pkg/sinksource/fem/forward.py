"""
Frame basis, boundary trace and the dense forward matrix A.

Column j of A is the boundary trace of the state generated by the frame
function psi_j = phi_j - (1/|domain|) integral of phi_j.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import yaml
from scipy.io import mmread, mmwrite

from sinksource.errors import SpectralError
from sinksource.fem.assembly import AssembledSystem, assemble, solve_rhs, solve_state
from sinksource.fem.mesh import Mesh, prolongation_pairs

logger = logging.getLogger(__name__)

# Columns solved per block when the forward matrix is built
COLUMN_BLOCK = 64


@dataclass(frozen=True, eq=False)
class FrameBasis:
    """
    Zero-mean frame {psi_j} of the source space.

    Attributes:
        basis_integrals: Integral of every hat function phi_j
        area: Domain area
    """
    basis_integrals: np.ndarray
    area: float

    @classmethod
    def from_system(cls, system: AssembledSystem) -> 'FrameBasis':
        return cls(system.basis_integrals, system.area)

    @property
    def n(self) -> int:
        return len(self.basis_integrals)

    @property
    def mean_shift(self) -> np.ndarray:
        """(1/|domain|) integral of phi_j for every j."""
        return self.basis_integrals / self.area

    def integral(self, x: np.ndarray) -> float:
        """Integral of f_h = sum_j x_j psi_j (zero up to rounding)."""
        x = np.asarray(x, dtype=float)
        return float(self.basis_integrals @ x - self.basis_integrals.sum() * (self.mean_shift @ x))

    def nodal_values(self, x: np.ndarray) -> np.ndarray:
        """Vertex values of f_h = sum_j x_j psi_j."""
        x = np.asarray(x, dtype=float)
        return x - self.mean_shift @ x


@dataclass(frozen=True, eq=False)
class ForwardModel:
    """
    Dense forward matrix with its trace bookkeeping.

    Attributes:
        A: (m, n) forward matrix
        trace_order: Boundary vertex indices in trace order
        boundary_weights: Lumped boundary mass at the trace nodes
    """
    A: np.ndarray
    trace_order: np.ndarray
    boundary_weights: np.ndarray

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def __repr__(self):
        return f"ForwardModel(m={self.m}, n={self.n})"

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float)

    def column_means(self) -> np.ndarray:
        """Boundary-mass-weighted mean of every column (zero by construction)."""
        return self.boundary_weights @ self.A / self.boundary_weights.sum()


def trace(system: AssembledSystem, u: np.ndarray) -> np.ndarray:
    """Boundary trace of nodal vector(s) in boundary order."""
    return np.asarray(u)[system.mesh.boundary_nodes]


def build_forward_matrix(system: AssembledSystem, workers: int = 1) -> ForwardModel:
    """
    Build A column by column: A[:, j] = trace of solve_state(system, e_j).

    Columns are solved in blocks, optionally on a thread pool; blocks are
    collected in index order so the result does not depend on the schedule.

    Args:
        system: Assembled system
        workers: Thread count for the column blocks

    Returns:
        The forward model

    Raises:
        StateSolveError: With the failing frame column attached
    """
    n = system.n
    loads = system.load_matrix()
    starts = list(range(0, n, COLUMN_BLOCK))

    def solve_block(start: int) -> np.ndarray:
        stop = min(start + COLUMN_BLOCK, n)
        return solve_rhs(system, loads[:, start:stop], first_column=start)[system.mesh.boundary_nodes]

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(solve_block, starts))
    else:
        blocks = [solve_block(s) for s in starts]

    A = np.hstack(blocks)
    weights = system.boundary_mass[system.mesh.boundary_nodes]
    model = ForwardModel(A=A, trace_order=system.mesh.boundary_nodes.copy(), boundary_weights=weights)
    logger.info(f"Built forward matrix {model.m}x{model.n} with {workers} worker(s)")
    return model


def reciprocity_defect(system: AssembledSystem) -> float:
    """
    Relative asymmetry of L^T U, with L the load map and U the states it generates.

    The bordered solve is self-adjoint, so this is zero up to rounding.
    """
    loads = system.load_matrix()
    states = solve_rhs(system, loads)
    pairing = loads.T @ states
    return float(np.abs(pairing - pairing.T).max() / max(np.abs(pairing).max(), 1e-300))


def prolongate(coarse: Mesh, fine: Mesh, x: np.ndarray) -> np.ndarray:
    """
    Carry coarse frame coefficients to the nested refinement of ``coarse``.

    The P1 function sum_j x_j phi_j is interpolated exactly; the mean shift is
    unchanged because the integral is preserved.

    Args:
        coarse: Inverse mesh
        fine: ``refine(coarse)``
        x: (n_coarse,) coefficients

    Returns:
        (n_fine,) coefficients
    """
    pairs = prolongation_pairs(coarse)
    if fine.n_vertices != coarse.n_vertices + len(pairs):
        raise ValueError("fine mesh is not the uniform refinement of the coarse mesh")
    x = np.asarray(x, dtype=float)
    return np.concatenate((x, 0.5 * (x[pairs[:, 0]] + x[pairs[:, 1]])))


def observe_refined(coarse_system: AssembledSystem, fine_system: AssembledSystem,
                    x: np.ndarray) -> np.ndarray:
    """
    Boundary data generated on the refined mesh and read at the coarse boundary nodes.

    The fine state is solved for the prolongated source, restricted to the
    coarse boundary nodes (a prefix of the fine vertices) and re-centred so
    its coarse boundary-mass mean is zero.

    Args:
        coarse_system: System on the inverse mesh
        fine_system: System on ``refine(inverse mesh)``
        x: Coarse frame coefficients

    Returns:
        (m,) data vector in the coarse trace order
    """
    coarse = coarse_system.mesh
    u_fine = solve_state(fine_system, prolongate(coarse, fine_system.mesh, x))
    data = u_fine[coarse.boundary_nodes]
    weights = coarse_system.boundary_mass[coarse.boundary_nodes]
    return data - (weights @ data) / weights.sum()


def _sidecar_path(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".sidecar.yaml"


def export_forward_model(model: ForwardModel, path: str) -> str:
    """
    Write A in Matrix Market array format plus a YAML sidecar.

    Returns:
        Sidecar path
    """
    mmwrite(path, model.A, comment="sinksource forward matrix", field='real', precision=17)
    sidecar = _sidecar_path(path)
    with open(sidecar, 'w') as f:
        yaml.safe_dump({
            'frame_size': int(model.n),
            'trace_order': [int(i) for i in model.trace_order],
            'boundary_weights': [float(w) for w in model.boundary_weights],
        }, f, sort_keys=False)
    logger.info(f"Exported forward matrix to {path} (sidecar {sidecar})")
    return sidecar


def import_forward_model(path: str) -> ForwardModel:
    """
    Read a forward matrix written by ``export_forward_model``.

    A missing sidecar yields identity trace order and unit boundary weights.
    """
    A = mmread(path)
    A = np.asarray(A.toarray() if hasattr(A, 'toarray') else A, dtype=float)
    sidecar = _sidecar_path(path)
    trace_order: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    if os.path.exists(sidecar):
        with open(sidecar, 'r') as f:
            meta = yaml.safe_load(f) or {}
        if int(meta.get('frame_size', A.shape[1])) != A.shape[1]:
            raise SpectralError(f"{sidecar}: frame_size does not match {path}")
        if meta.get('trace_order') is not None:
            trace_order = np.asarray(meta['trace_order'], dtype=np.int64)
        if meta.get('boundary_weights') is not None:
            weights = np.asarray(meta['boundary_weights'], dtype=float)
    else:
        logger.warning(f"No sidecar found for {path}; using default trace order")
    if trace_order is None:
        trace_order = np.arange(A.shape[0])
    if weights is None:
        weights = np.ones(A.shape[0])
    return ForwardModel(A=A, trace_order=trace_order, boundary_weights=weights)


def forward_from_mesh(mesh: Mesh, sigma, quadrature_order: int = 2,
                      workers: int = 1) -> Tuple[AssembledSystem, ForwardModel]:
    """Assemble ``mesh`` and build its forward matrix in one call."""
    system = assemble(mesh, sigma, quadrature_order)
    return system, build_forward_matrix(system, workers=workers)

