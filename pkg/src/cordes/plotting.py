"""
Cordes Plotting - Static convergence and mesh figures.

Figures are written as standalone SVG files with the non-interactive Agg
backend: ``<prefix>_convergence.svg`` (errors and estimator against ndof in
log-log scale with reference slopes) and ``<prefix>_mesh_<level>.svg`` for
each mesh snapshot.
"""

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from cordes.errors import ParameterError  # noqa: E402
from cordes.experiments import ErrorReport  # noqa: E402
from cordes.mesh_quad import QuadMesh, hanging_constraints  # noqa: E402
from cordes.mesh_tri import TriMesh  # noqa: E402
from cordes.styles import (  # noqa: E402
    FIGURE_SIZE,
    MESH_FIGURE_SIZE,
    MESH_LINE_WIDTH,
    REFERENCE_COLOR,
    REFERENCE_SLOPES,
    SERIES,
    Colors,
)

logger = logging.getLogger(__name__)

Mesh = Union[QuadMesh, TriMesh]


def _slope_label(slope: float) -> str:
    text = f"{-slope:g}"
    if text == "1.5":
        text = "3/2"
    return f"O(ndof^-{text})"


def plot_convergence(records: Sequence[ErrorReport], path: Union[str, Path]) -> Path:
    """Log-log plot of every available column against ndof."""
    ndof = np.array([r.ndof for r in records], dtype=float)
    fig, ax = plt.subplots(figsize=FIGURE_SIZE)
    anchor = None
    for column, style in SERIES.items():
        values = [getattr(r, column) for r in records]
        mask = np.array([v is not None and v > 0.0 for v in values])
        if not mask.any():
            continue
        y = np.array([v if m else np.nan for v, m in zip(values, mask)], dtype=float)
        ax.loglog(
            ndof[mask],
            y[mask],
            marker=style.marker,
            linestyle=style.linestyle,
            color=style.color.hex,
            label=style.label,
        )
        if anchor is None:
            first = int(np.flatnonzero(mask)[0])
            anchor = (ndof[first], y[first])

    if anchor is not None and len(ndof) > 1:
        n0, y0 = anchor
        span = np.array([ndof.min(), ndof.max()])
        for k, slope in enumerate(REFERENCE_SLOPES):
            ax.loglog(
                span,
                0.5 * y0 * (span / n0) ** slope,
                linestyle=(0, (1 + k, 2)),
                color=REFERENCE_COLOR,
                linewidth=0.9,
                label=_slope_label(slope),
            )

    ax.set_xlabel("ndof")
    ax.set_ylabel("error / estimator")
    ax.grid(True, which="both", color=Colors.GRAY_300.hex, linewidth=0.5)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return Path(path)


def plot_mesh(mesh: Mesh, path: Union[str, Path], title: str = "") -> Path:
    """Wireframe of a mesh; hanging vertices of rectangular meshes are dotted."""
    fig, ax = plt.subplots(figsize=MESH_FIGURE_SIZE)
    if isinstance(mesh, QuadMesh):
        corners = mesh.vertices[mesh.cells]
        closed = np.concatenate([corners, corners[:, :1]], axis=1)
        segments = np.stack([closed[:, :-1], closed[:, 1:]], axis=2).reshape(-1, 2, 2)
        ax.add_collection(
            LineCollection(segments, colors=Colors.MESH_EDGE.hex, linewidths=MESH_LINE_WIDTH)
        )
        hanging = [h.vertex for h in hanging_constraints(mesh)]
        if hanging:
            pts = mesh.vertices[hanging]
            ax.plot(pts[:, 0], pts[:, 1], ".", color=Colors.HANGING.hex, markersize=2)
    else:
        ax.triplot(
            mesh.vertices[:, 0],
            mesh.vertices[:, 1],
            mesh.triangles,
            color=Colors.MESH_EDGE.hex,
            linewidth=MESH_LINE_WIDTH,
        )
    ax.set_xlim(-1.0, 1.0)
    ax.set_ylim(-1.0, 1.0)
    ax.set_aspect("equal")
    ax.set_facecolor(Colors.MESH_FACE.hex)
    if title:
        ax.set_title(title, fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return Path(path)


def emit_plots(
    records: Sequence[ErrorReport],
    snapshots: Sequence[tuple[int, Mesh]],
    prefix: Union[str, Path],
) -> list[Path]:
    """
    Write the convergence plot and one wireframe per mesh snapshot.

    Args:
        records: Convergence records.
        snapshots: ``(level, mesh)`` pairs; may be empty.
        prefix: Path prefix of the SVG files.

    Returns:
        Written paths, convergence plot first.

    Raises:
        ParameterError: For an empty record list.
        OSError: If a file cannot be written.
    """
    if not records:
        raise ParameterError("no records to plot")
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    written = [plot_convergence(records, f"{prefix}_convergence.svg")]
    for level, mesh in snapshots:
        n = mesh.n_cells if isinstance(mesh, QuadMesh) else mesh.n_triangles
        written.append(
            plot_mesh(mesh, f"{prefix}_mesh_{level:02d}.svg", title=f"level {level}, {n} elements")
        )
    logger.debug("wrote %d figures with prefix %s", len(written), prefix)
    return written
