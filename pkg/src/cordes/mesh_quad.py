"""
Cordes Quad Meshes - Rectangular meshes of the square with hanging nodes.

A ``QuadMesh`` is a forest of quadtrees over a tensor grid of root
rectangles. Each cell is addressed by the key ``(ri, rj, level, i, j)``:
the cell ``(i, j)`` of the ``2^level x 2^level`` subdivision of root
rectangle ``(ri, rj)``. Refinement splits a cell into four congruent
children and keeps neighboring levels within one of each other, so every
edge carries at most one hanging vertex, its midpoint.

Example:
    >>> mesh = initial_quad_mesh(n=2)
    >>> mesh = refine_quads(mesh, {0})
    >>> mesh.n_cells, len(hanging_constraints(mesh))
    (7, 2)
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from cordes.errors import DomainError, ParameterError

logger = logging.getLogger(__name__)

CellKey = tuple[int, int, int, int, int]
AxisKey = tuple[int, Fraction]
VertexKey = tuple[AxisKey, AxisKey]

# Corner offsets in SW, SE, NE, NW order
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))

# Edges as corner pairs; endpoints ordered along the tangential axis
_EDGES = ((0, 1), (3, 2), (0, 3), (1, 2))

HORIZONTAL = 0
VERTICAL = 1


@dataclass(frozen=True)
class HangingEntry:
    """Hanging vertex ``vertex`` at parameter ``t`` on the coarse edge ``(a, b)``."""

    vertex: int
    a: int
    b: int
    t: float
    orientation: int


@dataclass(frozen=True, eq=False)
class QuadMesh:
    """
    Immutable rectangular mesh of the square.

    Attributes:
        xs: Root breakpoints in x, from -1 to 1.
        ys: Root breakpoints in y, from -1 to 1.
        keys: Cell keys ``(ri, rj, level, i, j)`` in cell order.
        vertices: ``(V, 2)`` coordinates.
        cells: ``(C, 4)`` vertex ids in SW, SE, NE, NW order.
        levels: ``(C,)`` refinement levels.
        vertex_keys: Exact grid key of each vertex.
    """

    xs: tuple[float, ...]
    ys: tuple[float, ...]
    keys: tuple[CellKey, ...]
    vertices: np.ndarray
    cells: np.ndarray
    levels: np.ndarray
    vertex_keys: tuple[VertexKey, ...]
    _vertex_index: dict = field(repr=False, compare=False)
    _cell_index: dict = field(repr=False, compare=False)

    kind = "quad"

    @property
    def n_cells(self) -> int:
        return len(self.keys)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def lower(self) -> np.ndarray:
        return self.vertices[self.cells[:, 0]]

    @property
    def upper(self) -> np.ndarray:
        return self.vertices[self.cells[:, 2]]

    def areas(self) -> np.ndarray:
        size = self.upper - self.lower
        return size[:, 0] * size[:, 1]

    def diameters(self) -> np.ndarray:
        return np.linalg.norm(self.upper - self.lower, axis=1)

    def h_max(self) -> float:
        return float(self.diameters().max())

    def boundary_x(self) -> np.ndarray:
        """Vertices on the vertical sides ``x = -1`` and ``x = 1``."""
        nx = len(self.xs) - 1
        return np.array([k[0] in ((0, Fraction(0)), (nx, Fraction(0))) for k in self.vertex_keys])

    def boundary_y(self) -> np.ndarray:
        """Vertices on the horizontal sides ``y = -1`` and ``y = 1``."""
        ny = len(self.ys) - 1
        return np.array([k[1] in ((0, Fraction(0)), (ny, Fraction(0))) for k in self.vertex_keys])

    def cell_of(self, key: CellKey) -> Optional[int]:
        return self._cell_index.get(key)

    def vertex_of(self, key: VertexKey) -> Optional[int]:
        return self._vertex_index.get(key)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """
        Find a cell containing each point.

        Args:
            points: ``(N, 2)`` points in the closed square.

        Returns:
            ``(N,)`` cell indices.

        Raises:
            DomainError: If a point lies outside the square.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any(np.abs(points) > 1.0):
            raise DomainError("point outside the square (-1, 1)^2")
        xs, ys = np.asarray(self.xs), np.asarray(self.ys)
        ri = np.clip(np.searchsorted(xs, points[:, 0], side="right") - 1, 0, len(xs) - 2)
        rj = np.clip(np.searchsorted(ys, points[:, 1], side="right") - 1, 0, len(ys) - 2)
        fx = (points[:, 0] - xs[ri]) / (xs[ri + 1] - xs[ri])
        fy = (points[:, 1] - ys[rj]) / (ys[rj + 1] - ys[rj])
        max_level = int(self.levels.max())
        out = np.empty(len(points), dtype=np.int64)
        for p in range(len(points)):
            for level in range(max_level + 1):
                n = 2**level
                i = min(int(fx[p] * n), n - 1)
                j = min(int(fy[p] * n), n - 1)
                idx = self._cell_index.get((int(ri[p]), int(rj[p]), level, i, j))
                if idx is not None:
                    out[p] = idx
                    break
            else:
                raise DomainError(f"no cell contains point {points[p]}")
        return out


# =============================================================================
# CONSTRUCTION
# =============================================================================


def _axis_key(root: int, frac: Fraction) -> AxisKey:
    if frac == 1:
        return (root + 1, Fraction(0))
    return (root, frac)


def _corner_key(key: CellKey, corner: tuple[int, int]) -> VertexKey:
    ri, rj, level, i, j = key
    n = 2**level
    return (
        _axis_key(ri, Fraction(i + corner[0], n)),
        _axis_key(rj, Fraction(j + corner[1], n)),
    )


def _coordinate(breaks: tuple[float, ...], key: AxisKey) -> float:
    root, frac = key
    if frac == 0:
        return breaks[root]
    return breaks[root] + (breaks[root + 1] - breaks[root]) * float(frac)


def _build(
    xs: tuple[float, ...],
    ys: tuple[float, ...],
    leaves: set,
    previous: Optional[QuadMesh] = None,
) -> QuadMesh:
    keys = tuple(sorted(leaves))
    vertex_index: dict = {} if previous is None else dict(previous._vertex_index)
    vertex_keys = [] if previous is None else list(previous.vertex_keys)
    cells = np.empty((len(keys), 4), dtype=np.int64)
    for c, key in enumerate(keys):
        for k, corner in enumerate(_CORNERS):
            vkey = _corner_key(key, corner)
            idx = vertex_index.get(vkey)
            if idx is None:
                idx = len(vertex_keys)
                vertex_index[vkey] = idx
                vertex_keys.append(vkey)
            cells[c, k] = idx
    vertices = np.array(
        [[_coordinate(xs, vx), _coordinate(ys, vy)] for vx, vy in vertex_keys], dtype=float
    )
    levels = np.array([k[2] for k in keys], dtype=np.int64)
    return QuadMesh(
        xs=xs,
        ys=ys,
        keys=keys,
        vertices=vertices,
        cells=cells,
        levels=levels,
        vertex_keys=tuple(vertex_keys),
        _vertex_index=vertex_index,
        _cell_index={k: c for c, k in enumerate(keys)},
    )


def initial_quad_mesh(n: Optional[int] = None, cross: Optional[tuple[float, float]] = None):
    """
    Build an initial rectangular mesh of ``(-1, 1)^2``.

    Exactly one of ``n`` and ``cross`` must be given.

    Args:
        n: Uniform ``n x n`` mesh of congruent squares.
        cross: Four rectangles meeting at this interior point.

    Returns:
        QuadMesh.

    Raises:
        ParameterError: For ``n < 1``, a point not strictly inside the square,
            or when both or neither option is given.
    """
    if (n is None) == (cross is None):
        raise ParameterError("give exactly one of n and cross")
    if n is not None:
        if n < 1:
            raise ParameterError(f"n must be at least 1, got {n}")
        breaks = tuple(float(v) for v in np.linspace(-1.0, 1.0, n + 1))
        xs = ys = breaks
    else:
        px, py = (float(v) for v in cross)
        if not (-1.0 < px < 1.0 and -1.0 < py < 1.0):
            raise ParameterError(f"cross point {cross} must lie strictly inside the square")
        xs, ys = (-1.0, px, 1.0), (-1.0, py, 1.0)
    leaves = {(ri, rj, 0, 0, 0) for ri in range(len(xs) - 1) for rj in range(len(ys) - 1)}
    return _build(xs, ys, leaves)


# =============================================================================
# REFINEMENT
# =============================================================================


def _find_leaf(leaves: set, key: CellKey) -> Optional[CellKey]:
    """Leaf containing the cell position ``key``; None if that region is finer."""
    ri, rj, level, i, j = key
    for up in range(level + 1):
        candidate = (ri, rj, level - up, i >> up, j >> up)
        if candidate in leaves:
            return candidate
    return None


def _neighbor_position(key: CellKey, direction: tuple[int, int], nx: int, ny: int):
    ri, rj, level, i, j = key
    n = 2**level
    i, j = i + direction[0], j + direction[1]
    if i < 0:
        ri, i = ri - 1, n - 1
    elif i >= n:
        ri, i = ri + 1, 0
    if j < 0:
        rj, j = rj - 1, n - 1
    elif j >= n:
        rj, j = rj + 1, 0
    if not (0 <= ri < nx and 0 <= rj < ny):
        return None
    return (ri, rj, level, i, j)


def refine_quads(mesh: QuadMesh, marked) -> QuadMesh:
    """
    Split marked cells into four congruent children, with closure.

    Before a cell is split, every coarser edge neighbor is split first, so
    no edge of the result carries more than one hanging vertex.

    Args:
        mesh: Current mesh.
        marked: Iterable of cell indices.

    Returns:
        Refined mesh; existing vertex ids are preserved.
    """
    marked = sorted({int(c) for c in marked})
    if marked and (marked[0] < 0 or marked[-1] >= mesh.n_cells):
        raise ParameterError("marked cell index out of range")
    leaves = set(mesh.keys)
    nx, ny = len(mesh.xs) - 1, len(mesh.ys) - 1
    directions = ((1, 0), (-1, 0), (0, 1), (0, -1))

    def split(key: CellKey) -> None:
        ri, rj, level, i, j = key
        for d in directions:
            position = _neighbor_position(key, d, nx, ny)
            if position is None:
                continue
            owner = _find_leaf(leaves, position)
            if owner is not None and owner[2] < level:
                split(owner)
        leaves.discard(key)
        for ci, cj in _CORNERS:
            leaves.add((ri, rj, level + 1, 2 * i + ci, 2 * j + cj))

    n_marked = len(marked)
    for c in marked:
        key = mesh.keys[c]
        if key in leaves:
            split(key)
    refined = _build(mesh.xs, mesh.ys, leaves, previous=mesh)
    logger.debug(
        "refine_quads: %d marked, %d -> %d cells",
        n_marked,
        mesh.n_cells,
        refined.n_cells,
    )
    return refined


# =============================================================================
# HANGING NODES
# =============================================================================


def _edge_point(key: CellKey, edge: tuple[int, int], t: Fraction) -> VertexKey:
    ri, rj, level, i, j = key
    n = 2**level
    ca, cb = _CORNERS[edge[0]], _CORNERS[edge[1]]
    fx = Fraction(i, n) + (ca[0] + (cb[0] - ca[0]) * t) / n
    fy = Fraction(j, n) + (ca[1] + (cb[1] - ca[1]) * t) / n
    return (_axis_key(ri, fx), _axis_key(rj, fy))


def hanging_constraints(mesh: QuadMesh) -> list[HangingEntry]:
    """
    List hanging vertices with the coarse edge they lie on.

    Returns:
        One ``HangingEntry`` per hanging vertex, sorted by vertex id. The
        endpoints ``a, b`` are ordered along the edge direction and ``t`` is
        always 1/2.
    """
    entries: dict[int, HangingEntry] = {}
    for c, key in enumerate(mesh.keys):
        for e, edge in enumerate(_EDGES):
            mid = mesh.vertex_of(_edge_point(key, edge, Fraction(1, 2)))
            if mid is None or mid in entries:
                continue
            a, b = mesh.cells[c, edge[0]], mesh.cells[c, edge[1]]
            entries[mid] = HangingEntry(
                vertex=int(mid),
                a=int(a),
                b=int(b),
                t=0.5,
                orientation=HORIZONTAL if e < 2 else VERTICAL,
            )
    return [entries[v] for v in sorted(entries)]


def check_one_hanging_node(mesh: QuadMesh) -> bool:
    """Scan every cell edge for more than one hanging vertex."""
    quarter, three_quarters = Fraction(1, 4), Fraction(3, 4)
    for key in mesh.keys:
        for edge in _EDGES:
            for t in (quarter, three_quarters):
                if mesh.vertex_of(_edge_point(key, edge, t)) is not None:
                    return False
    return True


def is_refinement_of(fine: QuadMesh, coarse: QuadMesh) -> bool:
    """True iff every cell of ``fine`` lies in exactly one cell of ``coarse``."""
    if fine.xs != coarse.xs or fine.ys != coarse.ys:
        return False
    coarse_leaves = set(coarse.keys)
    return all(_find_leaf(coarse_leaves, key) is not None for key in fine.keys)
