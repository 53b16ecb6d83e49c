"""
Text mesh format.

    mesh 2d
    v x y
    t i j k
    b i

Indices are 0-based. Coordinates are written with ``repr`` so import and
export round-trip bit-exactly.
"""
import logging
import os
from typing import List

import numpy as np

from sinksource.errors import MeshError
from sinksource.fem.mesh import DomainTag, Mesh

logger = logging.getLogger(__name__)

HEADER = "mesh 2d"


def write_mesh(mesh: Mesh, path: str) -> None:
    """
    Write a mesh to a text file.

    Args:
        mesh: Mesh to export
        path: Destination file
    """
    lines: List[str] = [HEADER]
    lines.extend(f"v {float(x)!r} {float(y)!r}" for x, y in mesh.vertices)
    lines.extend(f"t {i} {j} {k}" for i, j, k in mesh.triangles)
    lines.extend(f"b {i}" for i in mesh.boundary_nodes)
    try:
        with open(path, 'w') as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise MeshError(f"cannot write mesh to {path}: {e}") from e
    logger.info(f"Wrote {mesh!r} to {path}")


def read_mesh(path: str) -> Mesh:
    """
    Read a mesh written by ``write_mesh`` (or any conforming file of the same format).

    Args:
        path: Source file

    Returns:
        Mesh tagged as external

    Raises:
        MeshError: On a malformed file or a mesh that violates the invariants
    """
    if not os.path.exists(path):
        raise MeshError(f"mesh file {path} not found")

    vertices, triangles, boundary = [], [], []
    with open(path, 'r') as f:
        header = f.readline().strip()
        if header != HEADER:
            raise MeshError(f"{path}: expected header '{HEADER}', got '{header}'")
        for lineno, line in enumerate(f, start=2):
            parts = line.split()
            if not parts:
                continue
            try:
                if parts[0] == 'v' and len(parts) == 3:
                    vertices.append((float(parts[1]), float(parts[2])))
                elif parts[0] == 't' and len(parts) == 4:
                    triangles.append(tuple(int(p) for p in parts[1:]))
                elif parts[0] == 'b' and len(parts) == 2:
                    boundary.append(int(parts[1]))
                else:
                    raise ValueError(f"unrecognised record '{line.strip()}'")
            except ValueError as e:
                raise MeshError(f"{path}:{lineno}: {e}") from e

    if not vertices or not triangles:
        raise MeshError(f"{path}: mesh has no vertices or no triangles")

    mesh = Mesh(np.array(vertices), np.array(triangles), np.array(boundary, dtype=np.int64),
                DomainTag.EXTERNAL)
    mesh.validate()
    logger.info(f"Read {mesh!r} from {path}")
    return mesh
