"""
Cordes Output - Convergence tables and mesh dumps.

The CSV columns are ``level,ndof,h_max,err_h2,err_grad,err_l2,eta,efficiency``;
absent values are written as empty cells and reals with 12 significant
digits. Mesh dumps are line-oriented text with the sections
``VERTICES``/``CELLS``/``HANGING`` (rectangles) or ``VERTICES``/``TRIANGLES``
(triangles), space-separated fields and 0-based indices.
"""

import csv
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Optional, Union

from cordes.errors import ParameterError
from cordes.experiments import ErrorReport
from cordes.mesh_quad import QuadMesh, hanging_constraints
from cordes.mesh_tri import TriMesh

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("level", "ndof", "h_max", "err_h2", "err_grad", "err_l2", "eta", "efficiency")
_INT_COLUMNS = ("level", "ndof")


def _format(value: Optional[float]) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return f"{value:.12g}"


def _prepare(path: Union[str, Path]) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


# =============================================================================
# CSV
# =============================================================================


def emit_csv(records: Sequence[ErrorReport], path: Union[str, Path]) -> Path:
    """
    Write one row per level.

    Args:
        records: Convergence records.
        path: Output file.

    Returns:
        The written path.

    Raises:
        ParameterError: For an empty record list.
        OSError: If the file cannot be written.
    """
    if not records:
        raise ParameterError("no records to write")
    path = _prepare(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in records:
            row = record.as_dict()
            writer.writerow([_format(row[column]) for column in CSV_COLUMNS])
    logger.debug("wrote %d rows to %s", len(records), path)
    return path


def load_csv(path: Union[str, Path]) -> list[ErrorReport]:
    """Read a table written by ``emit_csv``."""
    records = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            values = {
                column: (
                    None
                    if row[column] == ""
                    else int(row[column])
                    if column in _INT_COLUMNS
                    else float(row[column])
                )
                for column in CSV_COLUMNS
            }
            records.append(ErrorReport(**values))
    return records


# =============================================================================
# MESH DUMPS
# =============================================================================


def _quad_lines(mesh: QuadMesh) -> list[str]:
    lines = [f"VERTICES {mesh.n_vertices}"]
    lines += [f"{i} {x:.17g} {y:.17g}" for i, (x, y) in enumerate(mesh.vertices)]
    lines.append(f"CELLS {mesh.n_cells}")
    lines += [
        f"{i} {v[0]} {v[1]} {v[2]} {v[3]} {level}"
        for i, (v, level) in enumerate(zip(mesh.cells, mesh.levels))
    ]
    hanging = hanging_constraints(mesh)
    lines.append(f"HANGING {len(hanging)}")
    lines += [f"{h.vertex} {h.a} {h.b} {h.t:g}" for h in hanging]
    return lines


def _tri_lines(mesh: TriMesh) -> list[str]:
    lines = [f"VERTICES {mesh.n_vertices}"]
    lines += [f"{i} {x:.17g} {y:.17g}" for i, (x, y) in enumerate(mesh.vertices)]
    lines.append(f"TRIANGLES {mesh.n_triangles}")
    lines += [
        f"{i} {t[0]} {t[1]} {t[2]} {mesh.ref_edge} {gen}"
        for i, (t, gen) in enumerate(zip(mesh.triangles, mesh.generations))
    ]
    return lines


def dump_mesh(mesh: Union[QuadMesh, TriMesh], path: Union[str, Path]) -> Path:
    """
    Write a mesh as sectioned text.

    Rectangles: ``VERTICES`` rows ``i x y``, ``CELLS`` rows
    ``i v0 v1 v2 v3 level`` and ``HANGING`` rows ``v a b t``. Triangles:
    ``VERTICES`` and ``TRIANGLES`` rows ``i v0 v1 v2 ref_edge generation``.
    Each section header carries its row count.

    Raises:
        OSError: If the file cannot be written.
    """
    lines = _quad_lines(mesh) if isinstance(mesh, QuadMesh) else _tri_lines(mesh)
    path = _prepare(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
