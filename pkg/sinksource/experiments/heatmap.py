"""
Signed nodal fields rendered on the triangulation as SVG.
"""
import logging
from typing import Optional

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from matplotlib.tri import Triangulation

from sinksource.fem.mesh import Mesh

logger = logging.getLogger(__name__)

COLORMAP = 'RdBu_r'

# Fixed salt and no date keep the SVG byte-identical across runs
SVG_SETTINGS = {'svg.hashsalt': 'sinksource', 'svg.fonttype': 'none'}


def color_limit(values: np.ndarray) -> float:
    """Symmetric color limit max |v| (1 for a zero field)."""
    vmax = float(np.abs(values).max()) if np.size(values) else 0.0
    return vmax if vmax > 0 else 1.0


def render_heatmap(mesh: Mesh, values: np.ndarray, path: str, title: Optional[str] = None) -> str:
    """
    Write a piecewise-linear nodal field as a zero-centred diverging heatmap.

    Args:
        mesh: Mesh carrying the field
        values: (n_vertices,) nodal values
        path: Output .svg path
        title: Optional axes title

    Returns:
        The path written
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_vertices,):
        raise ValueError(f"expected {mesh.n_vertices} nodal values, got shape {values.shape}")
    vmax = color_limit(values)

    with matplotlib.rc_context(SVG_SETTINGS):
        fig = Figure(figsize=(5.0, 4.2))
        ax = fig.add_subplot(1, 1, 1)
        tri = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
        image = ax.tripcolor(tri, values, shading='gouraud', cmap=COLORMAP, vmin=-vmax, vmax=vmax)
        ax.set_aspect('equal')
        ax.set_xticks([])
        ax.set_yticks([])
        if title:
            ax.set_title(title)
        fig.colorbar(image, ax=ax, shrink=0.8)
        fig.savefig(path, format='svg', metadata={'Date': None})
    logger.debug(f"Wrote heatmap {path} (|v| <= {vmax:.4g})")
    return path
