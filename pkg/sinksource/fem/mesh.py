"""
Triangular meshes of the square, box and cross-shaped domains.

Vertices are stored as an (N, 2) array and triangles as an (T, 3) array of
counterclockwise vertex indices. Boundary nodes are ordered counterclockwise
starting at the lexicographically smallest boundary vertex.
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from sinksource.config.config_models import MeshConfig
from sinksource.errors import MeshError

logger = logging.getLogger(__name__)

# Jitter radius as a fraction of the shortest incident edge
GRADING_FRACTION = 0.25

# Relative tolerance for a vertex lying on an edge
HANGING_TOL = 1e-9


class DomainTag(enum.Enum):
    """Domain a mesh was built for."""
    UNIT_SQUARE = "unit_square"
    BOX = "box"
    CROSS = "cross"
    EXTERNAL = "external"


def _readonly(array: np.ndarray, dtype) -> np.ndarray:
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Immutable 2D triangulation with boundary bookkeeping.

    Attributes:
        vertices: (N, 2) vertex coordinates
        triangles: (T, 3) counterclockwise vertex indices
        boundary_nodes: boundary vertex indices in counterclockwise order
        domain_tag: Domain the mesh was built for
        h_max: Longest edge length
    """
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    domain_tag: DomainTag = DomainTag.EXTERNAL
    h_max: float = field(default=0.0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'vertices', _readonly(self.vertices, float))
        object.__setattr__(self, 'triangles', _readonly(self.triangles, np.int64))
        object.__setattr__(self, 'boundary_nodes', _readonly(self.boundary_nodes, np.int64))
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError(f"vertices must have shape (N, 2), got {self.vertices.shape}")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError(f"triangles must have shape (T, 3), got {self.triangles.shape}")
        if not self.h_max:
            object.__setattr__(self, 'h_max', float(self.edge_lengths().max()))

    def __repr__(self):
        return (f"Mesh(domain={self.domain_tag.value}, vertices={self.n_vertices}, "
                f"triangles={self.n_triangles}, boundary={len(self.boundary_nodes)}, "
                f"h_max={self.h_max:.4g})")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted (i, j) rows in lexicographic order."""
        return np.unique(_triangle_edges(self.triangles), axis=0)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self) -> float:
        return float(self.signed_areas().sum())

    def quality(self) -> np.ndarray:
        """Inradius to circumradius ratio of every triangle (0.5 when equilateral)."""
        p = self.vertices[self.triangles]
        a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
        c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        s = 0.5 * (a + b + c)
        area = self.signed_areas()
        return 4.0 * area ** 2 / (s * a * b * c)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    def interior_nodes(self) -> np.ndarray:
        return np.nonzero(~self.boundary_mask())[0]

    def euler_characteristic(self) -> int:
        """V - E + F counting triangles only (1 for a simply connected domain)."""
        return self.n_vertices - len(self.edges()) + self.n_triangles

    def nearest_vertex(self, point: Sequence[float], candidates: Optional[np.ndarray] = None) -> int:
        """
        Index of the vertex closest to a point.

        Args:
            point: 2D coordinate
            candidates: Optional subset of vertex indices to search

        Returns:
            Vertex index into the full vertex array
        """
        pool = np.arange(self.n_vertices) if candidates is None else np.asarray(candidates)
        _, i = cKDTree(self.vertices[pool]).query(np.asarray(point, dtype=float))
        return int(pool[i])

    def neighbours(self, vertex: int) -> np.ndarray:
        """Vertices sharing an edge with ``vertex``, sorted."""
        e = self.edges()
        hits = np.concatenate((e[e[:, 0] == vertex, 1], e[e[:, 1] == vertex, 0]))
        return np.sort(hits)

    def hanging_nodes(self) -> np.ndarray:
        """Vertices lying strictly inside an edge they are not an endpoint of, sorted."""
        e = self.edges()
        p, q = self.vertices[e[:, 0]], self.vertices[e[:, 1]]
        d = q - p
        length2 = np.einsum('ij,ij->i', d, d)
        tree = cKDTree(self.vertices)
        hits = set()
        for row in range(len(e)):
            radius = 0.5 * np.sqrt(length2[row]) * (1.0 + HANGING_TOL)
            pool = np.array([v for v in tree.query_ball_point(0.5 * (p[row] + q[row]), radius)
                             if v != e[row, 0] and v != e[row, 1]], dtype=np.int64)
            if not pool.size:
                continue
            r = self.vertices[pool] - p[row]
            t = (r @ d[row]) / length2[row]
            cross = r[:, 0] * d[row, 1] - r[:, 1] * d[row, 0]
            on = (np.abs(cross) <= HANGING_TOL * length2[row]) & (t > HANGING_TOL) & (t < 1.0 - HANGING_TOL)
            hits.update(int(v) for v in pool[on])
        return np.array(sorted(hits), dtype=np.int64)

    def validate(self) -> None:
        """
        Check orientation, conformity and boundary bookkeeping.

        Conformity means no edge is shared by more than two triangles and no
        vertex lies inside another triangle's edge (hanging node).

        Raises:
            MeshError: On the first violated invariant
        """
        if self.triangles.min() < 0 or self.triangles.max() >= self.n_vertices:
            raise MeshError("triangle references a vertex out of range")
        bad = np.nonzero(self.signed_areas() <= 0.0)[0]
        if bad.size:
            raise MeshError(f"triangle {int(bad[0])} is not positively oriented")
        _, counts = np.unique(_triangle_edges(self.triangles), axis=0, return_counts=True)
        if counts.max() > 2:
            raise MeshError("an edge is shared by more than two triangles")
        hanging = self.hanging_nodes()
        if hanging.size:
            raise MeshError(f"hanging node {int(hanging[0])} lies inside an edge")
        expected = np.unique(boundary_edges(self.triangles))
        if not np.array_equal(np.sort(self.boundary_nodes), expected):
            raise MeshError("boundary_nodes does not match the single-triangle edges")


def _triangle_edges(triangles: np.ndarray) -> np.ndarray:
    """All 3T triangle edges as sorted vertex pairs (with repetitions)."""
    e = np.vstack((triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]))
    return np.sort(e, axis=1)


def boundary_edges(triangles: np.ndarray) -> np.ndarray:
    """Directed (counterclockwise) edges that belong to exactly one triangle."""
    directed = np.vstack((triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]))
    undirected = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(undirected, axis=0, return_inverse=True, return_counts=True)
    return directed[counts[inverse.ravel()] == 1]


def order_boundary(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """
    Walk the boundary counterclockwise from the lexicographically smallest vertex.

    Args:
        vertices: (N, 2) coordinates
        triangles: (T, 3) counterclockwise triangles

    Returns:
        Ordered boundary vertex indices. Additional boundary loops (holes)
        follow the first one, each starting at its own smallest vertex.

    Raises:
        MeshError: If a boundary vertex has more than one outgoing boundary edge
    """
    directed = boundary_edges(triangles)
    successor: Dict[int, int] = {}
    for a, b in directed:
        if int(a) in successor:
            raise MeshError(f"boundary vertex {int(a)} is a pinch point")
        successor[int(a)] = int(b)

    remaining = set(successor)
    ordered: List[int] = []
    while remaining:
        pool = np.array(sorted(remaining))
        start = int(pool[np.lexsort((vertices[pool, 1], vertices[pool, 0]))[0]])
        node = start
        while True:
            ordered.append(node)
            remaining.discard(node)
            node = successor[node]
            if node == start:
                break
            if node not in remaining:
                raise MeshError("boundary edges do not form closed loops")
    return np.array(ordered, dtype=np.int64)


@dataclass
class DomainSpec:
    """
    Domain descriptor for build_domain.

    Attributes:
        domain: unit_square, box or cross
        divisions: Cells per unit-square side, or across the centre square of the cross
        grading_seed: Seed for interior vertex jitter; None keeps the mesh uniform
        arm_width: Width of each cross arm
        hub_width: Side of the centre square of the cross; None makes it arm_width
        extent: Half-size of the bounding square for box and cross
        quality_floor: Minimum admissible inradius/circumradius ratio
    """
    domain: str = "unit_square"
    divisions: int = 16
    grading_seed: Optional[int] = None
    arm_width: float = 2.0 / 3.0
    hub_width: Optional[float] = None
    extent: float = 1.0
    quality_floor: float = 0.02

    @classmethod
    def from_config(cls, config: MeshConfig) -> 'DomainSpec':
        return cls(domain=config.domain, divisions=config.divisions,
                   grading_seed=config.grading_seed, arm_width=config.arm_width,
                   hub_width=config.hub_width, extent=config.extent,
                   quality_floor=config.quality_floor)

    @property
    def hub(self) -> float:
        return self.arm_width if self.hub_width is None else self.hub_width

    def analytic_area(self) -> float:
        if self.domain == DomainTag.UNIT_SQUARE.value:
            return 1.0
        if self.domain == DomainTag.BOX.value:
            return (2.0 * self.extent) ** 2
        if self.domain == DomainTag.CROSS.value:
            return self.hub ** 2 + 4.0 * (self.extent - 0.5 * self.hub) * self.arm_width
        raise MeshError(f"unknown domain '{self.domain}'")


def _grid(xs: np.ndarray, ys: np.ndarray, keep=None):
    """Triangulate the tensor grid xs x ys, keeping cells whose centre passes ``keep``."""
    nx, ny = len(xs) - 1, len(ys) - 1
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack((gx.ravel(), gy.ravel()))

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    if keep is not None:
        cx = 0.5 * (xs[i] + xs[i + 1])
        cy = 0.5 * (ys[j] + ys[j + 1])
        mask = keep(cx, cy)
        i, j = i[mask], j[mask]

    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    # Interleave the two triangles of each cell
    triangles = np.empty((2 * len(v00), 3), dtype=np.int64)
    triangles[0::2] = np.column_stack((v00, v10, v11))
    triangles[1::2] = np.column_stack((v00, v11, v01))

    used = np.unique(triangles)
    if len(used) < len(vertices):
        remap = -np.ones(len(vertices), dtype=np.int64)
        remap[used] = np.arange(len(used))
        vertices = vertices[used]
        triangles = remap[triangles]
    return vertices, triangles


def _cross_axis(extent: float, hub: float, divisions: int) -> np.ndarray:
    """Grid lines with ``divisions`` cells across the centre square and the same spacing in the arms."""
    half = 0.5 * hub
    outer = max(1, int(round(divisions * (extent - half) / hub)))
    left = np.linspace(-extent, -half, outer + 1)
    centre = np.linspace(-half, half, divisions + 1)
    right = np.linspace(half, extent, outer + 1)
    return np.concatenate((left, centre[1:], right[1:]))


def _grade(vertices: np.ndarray, triangles: np.ndarray, boundary: np.ndarray, seed: int) -> np.ndarray:
    """Seeded jitter of interior vertices within a fraction of the shortest incident edge."""
    rng = np.random.default_rng(seed)
    edges = np.unique(_triangle_edges(triangles), axis=0)
    lengths = np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)
    shortest = np.full(len(vertices), np.inf)
    np.minimum.at(shortest, edges[:, 0], lengths)
    np.minimum.at(shortest, edges[:, 1], lengths)

    interior = np.setdiff1d(np.arange(len(vertices)), boundary)
    radius = GRADING_FRACTION * shortest[interior] * rng.random(len(interior))
    angle = 2.0 * np.pi * rng.random(len(interior))
    graded = vertices.copy()
    graded[interior, 0] += radius * np.cos(angle)
    graded[interior, 1] += radius * np.sin(angle)
    return graded


def build_domain(spec: DomainSpec) -> Mesh:
    """
    Build a conforming mesh of the requested domain.

    Args:
        spec: Domain descriptor

    Returns:
        Validated mesh

    Raises:
        MeshError: On zero divisions, degenerate arm geometry, an unknown
            domain or a graded mesh whose quality drops below the floor
    """
    if spec.divisions < 1:
        raise MeshError(f"divisions must be at least 1, got {spec.divisions}")

    n = spec.divisions
    if spec.domain == DomainTag.UNIT_SQUARE.value:
        axis = np.linspace(0.0, 1.0, n + 1)
        vertices, triangles = _grid(axis, axis)
    elif spec.domain == DomainTag.BOX.value:
        if spec.extent <= 0:
            raise MeshError(f"box extent must be positive, got {spec.extent}")
        axis = np.linspace(-spec.extent, spec.extent, n + 1)
        vertices, triangles = _grid(axis, axis)
    elif spec.domain == DomainTag.CROSS.value:
        half, hub = 0.5 * spec.arm_width, 0.5 * spec.hub
        if spec.arm_width <= 0 or spec.hub < spec.arm_width or spec.extent <= hub:
            raise MeshError(f"degenerate cross geometry: arm_width={spec.arm_width}, "
                            f"hub_width={spec.hub}, extent={spec.extent}")
        # Arm edges must fall on grid lines of the centre square
        rows = spec.arm_width * n / spec.hub
        if abs(rows - round(rows)) > 1e-9 or (n - int(round(rows))) % 2:
            raise MeshError(f"arm_width={spec.arm_width} does not cover a centred whole number of "
                            f"the {n} cells across hub_width={spec.hub}")
        axis = _cross_axis(spec.extent, spec.hub, n)
        vertices, triangles = _grid(
            axis, axis,
            keep=lambda cx, cy: ((np.abs(cx) < hub) & (np.abs(cy) < hub)) | (np.abs(cx) < half) | (np.abs(cy) < half))
    else:
        raise MeshError(f"unknown domain '{spec.domain}'")

    boundary = order_boundary(vertices, triangles)
    if spec.grading_seed is not None:
        vertices = _grade(vertices, triangles, boundary, spec.grading_seed)

    mesh = Mesh(vertices, triangles, boundary, DomainTag(spec.domain))
    mesh.validate()
    worst = float(mesh.quality().min())
    if worst < spec.quality_floor:
        raise MeshError(f"minimum triangle quality {worst:.4g} below floor {spec.quality_floor}")

    logger.info(f"Built {mesh!r}")
    return mesh


def refine(mesh: Mesh) -> Mesh:
    """
    Split every triangle into four through its edge midpoints.

    The coarse vertices form a prefix of the refined vertex array; midpoint
    vertices follow in the order of ``mesh.edges()``.

    Args:
        mesh: Valid input mesh

    Returns:
        The nested refinement, with h_max halved
    """
    edges = mesh.edges()
    n = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack((mesh.vertices, midpoints))

    # Sorted edges give sorted keys lo * n + hi
    keys = edges[:, 0] * n + edges[:, 1]

    def mid(p: np.ndarray, q: np.ndarray) -> np.ndarray:
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        return n + np.searchsorted(keys, lo * n + hi)

    a, b, c = mesh.triangles[:, 0], mesh.triangles[:, 1], mesh.triangles[:, 2]
    mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
    children = np.stack((
        np.column_stack((a, mab, mca)),
        np.column_stack((mab, b, mbc)),
        np.column_stack((mca, mbc, c)),
        np.column_stack((mab, mbc, mca)),
    ), axis=1).reshape(-1, 3)

    fine = Mesh(vertices, children, order_boundary(vertices, children), mesh.domain_tag)
    logger.debug(f"Refined {mesh!r} -> {fine!r}")
    return fine


def prolongation_pairs(coarse: Mesh) -> np.ndarray:
    """Parent vertex pairs of the midpoints appended by ``refine`` (same order)."""
    return coarse.edges()
