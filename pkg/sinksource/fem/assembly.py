"""
P1 finite element assembly of the pure Neumann problem.

    -div(sigma grad u) = f_h  in the domain,  sigma grad u . n = 0  on the boundary,
    integral of u over the boundary = 0.

The zero boundary mean is imposed with a bordered Lagrange-multiplier system
[[K, m], [m^T, 0]] built from the lumped boundary mass m.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from sinksource.errors import AssemblyError, StateSolveError
from sinksource.fem.conductivity import ConductivityField
from sinksource.fem.mesh import Mesh, boundary_edges

logger = logging.getLogger(__name__)

# Relative backward error accepted from the bordered solve
RESIDUAL_TOL = 1e-10

# Barycentric quadrature rules: (points, weights) on the reference triangle
QUADRATURE_RULES = {
    1: (np.array([[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]]), np.array([1.0])),
    2: (np.array([[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
                  [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                  [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]]),
        np.full(3, 1.0 / 3.0)),
}


def quadrature_rule(order: int):
    """Barycentric points and weights (summing to 1) for a supported order."""
    if order not in QUADRATURE_RULES:
        raise AssemblyError(f"unsupported quadrature order {order}; "
                            f"choose one of {sorted(QUADRATURE_RULES)}")
    return QUADRATURE_RULES[order]


def p1_gradients(mesh: Mesh):
    """
    Barycentric gradients and areas of every triangle.

    Returns:
        (gradients (T, 3, 2), areas (T,))
    """
    p = mesh.vertices[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    area = mesh.signed_areas()
    grads = np.empty((mesh.n_triangles, 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = (y[:, j] - y[:, k]) / (2.0 * area)
        grads[:, i, 1] = (x[:, k] - x[:, j]) / (2.0 * area)
    return grads, area


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    """Sum (T, 3, 3) element matrices into a global sparse matrix."""
    rows = np.repeat(mesh.triangles, 3, axis=1)
    cols = np.tile(mesh.triangles, (1, 3))
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def assemble_stiffness(mesh: Mesh, sigma: ConductivityField, quadrature_order: int = 2) -> sp.csr_matrix:
    """
    Stiffness matrix K_ij = integral of sigma grad(phi_j) . grad(phi_i).

    Raises:
        AssemblyError: On an unsupported rule or a non-SPD conductivity sample
    """
    bary, weights = quadrature_rule(quadrature_order)
    grads, area = p1_gradients(mesh)
    corners = mesh.vertices[mesh.triangles]
    points = np.einsum('qa,tad->tqd', bary, corners)
    tensors = sigma.evaluate(points.reshape(-1, 2)).reshape(mesh.n_triangles, len(weights), 2, 2)
    logger.debug(f"Sampled {sigma.name} at {points.shape[0] * points.shape[1]} quadrature points")

    mean_sigma = np.einsum('q,tqij->tij', weights, tensors)
    local = area[:, None, None] * np.einsum('tai,tij,tbj->tab', grads, mean_sigma, grads)
    stiffness = _scatter(mesh, local)
    return ((stiffness + stiffness.T) * 0.5).tocsr()


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix."""
    reference = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = mesh.signed_areas()[:, None, None] * reference
    return _scatter(mesh, local)


def assemble_boundary_mass(mesh: Mesh) -> np.ndarray:
    """Lumped boundary mass: every boundary edge gives half its length to each endpoint."""
    edges = boundary_edges(mesh.triangles)
    length = np.linalg.norm(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]], axis=1)
    weights = np.zeros(mesh.n_vertices)
    np.add.at(weights, edges[:, 0], 0.5 * length)
    np.add.at(weights, edges[:, 1], 0.5 * length)
    return weights


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """
    Immutable FEM system with a factorized bordered matrix.

    Attributes:
        mesh: Triangulation
        conductivity: Field the stiffness was built from
        stiffness: Sparse symmetric K
        mass: Consistent mass matrix M
        basis_integrals: Integral of every hat function (row sums of M)
        boundary_mass: Lumped boundary weights realizing the boundary integral
        area: Domain area
        quadrature_order: Rule used for sigma
    """
    mesh: Mesh
    conductivity: ConductivityField
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    basis_integrals: np.ndarray
    boundary_mass: np.ndarray
    area: float
    quadrature_order: int
    _factor: object = field(default=None, repr=False)
    _bordered: Optional[sp.csc_matrix] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.mesh.n_vertices

    def load(self, x: np.ndarray) -> np.ndarray:
        """
        FEM load vector of f_h = sum_j x_j psi_j, psi_j = phi_j - mean of phi_j.

        Args:
            x: (n,) coefficients or (n, c) coefficient columns
        """
        x = np.asarray(x, dtype=float)
        shift = np.tensordot(self.basis_integrals, x, axes=(0, 0)) / self.area
        return self.mass @ x - np.multiply.outer(self.basis_integrals, shift)

    def load_matrix(self) -> np.ndarray:
        """Dense load map M - b b^T / |domain| applied to the identity."""
        b = self.basis_integrals
        return self.mass.toarray() - np.outer(b, b) / self.area

    def bordered_matrix(self) -> sp.csc_matrix:
        return self._bordered

    def solve_state(self, x: np.ndarray) -> np.ndarray:
        return solve_state(self, x)


def assemble(mesh: Mesh, sigma: ConductivityField, quadrature_order: int = 2) -> AssembledSystem:
    """
    Assemble stiffness, mass and boundary weights and factorize the bordered system.

    Args:
        mesh: Valid mesh
        sigma: SPD conductivity
        quadrature_order: 1 (centroid) or 2 (three-point rule)

    Returns:
        The assembled system

    Raises:
        AssemblyError: Non-SPD conductivity sample or unsupported rule
        StateSolveError: Singular bordered matrix (invalid mesh)
    """
    stiffness = assemble_stiffness(mesh, sigma, quadrature_order)
    mass = assemble_mass(mesh)
    basis_integrals = np.asarray(mass.sum(axis=1)).ravel()
    boundary_mass = assemble_boundary_mass(mesh)

    m = sp.csr_matrix(boundary_mass.reshape(-1, 1))
    bordered = sp.bmat([[stiffness, m], [m.T, None]], format='csc')
    try:
        factor = splu(bordered)
    except RuntimeError as e:
        raise StateSolveError(f"bordered system is singular: {e}") from e

    system = AssembledSystem(mesh=mesh, conductivity=sigma, stiffness=stiffness, mass=mass,
                             basis_integrals=basis_integrals, boundary_mass=boundary_mass,
                             area=float(basis_integrals.sum()), quadrature_order=quadrature_order,
                             _factor=factor, _bordered=bordered)
    logger.info(f"Assembled {mesh.n_vertices} dofs, {stiffness.nnz} stiffness nonzeros, "
                f"sigma={sigma.name}, quadrature order {quadrature_order}")
    return system


def solve_rhs(system: AssembledSystem, rhs: np.ndarray, first_column: int = 0) -> np.ndarray:
    """
    Solve the bordered system for FEM load vector(s).

    Args:
        system: Assembled system
        rhs: (n,) or (n, c) load vectors
        first_column: Frame index of the first column, used in error messages

    Returns:
        State vector(s) u with the multiplier row stripped

    Raises:
        StateSolveError: If the backward error exceeds the tolerance
    """
    rhs = np.asarray(rhs, dtype=float)
    single = rhs.ndim == 1
    load = rhs.reshape(system.n, -1)
    full = np.vstack((load, np.zeros((1, load.shape[1]))))
    z = system._factor.solve(full)

    bordered = system._bordered
    residual = np.linalg.norm(bordered @ z - full, axis=0)
    norm_b = float(abs(bordered).sum(axis=1).max())
    scale = np.maximum(np.linalg.norm(full, axis=0), norm_b * np.linalg.norm(z, axis=0))
    bad = np.nonzero(~np.isfinite(residual) | (residual > RESIDUAL_TOL * np.maximum(scale, 1e-300)))[0]
    if bad.size:
        raise StateSolveError(f"bordered solve residual {residual[bad[0]]:.3e} exceeds tolerance",
                              column=first_column + int(bad[0]))

    u = z[:-1]
    return u[:, 0] if single else u


def solve_state(system: AssembledSystem, x: np.ndarray) -> np.ndarray:
    """
    State u_h for frame coefficients x.

    Args:
        system: Assembled system
        x: (n,) frame coefficients

    Returns:
        (n,) nodal values with zero boundary mean
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise StateSolveError("frame coefficients must be finite")
    return solve_rhs(system, system.load(x))
