"""
Cordes Triangle Meshes - Conforming triangulations with newest-vertex bisection.

Triangles are stored as ``(a, b, c)`` in counterclockwise order with the
refinement edge ``(a, b)`` and the newest vertex ``c``. Bisection of
``(a, b, c)`` at the midpoint ``m`` of ``(a, b)`` yields the children
``(c, a, m)`` and ``(b, c, m)``, which again have their refinement edge
opposite the newest vertex.

Example:
    >>> mesh = initial_tri_mesh(n=1)
    >>> mesh = nvb_refine(mesh, {0})
    >>> mesh.n_triangles, check_conforming(mesh)
    (4, True)
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cordes.errors import ParameterError

logger = logging.getLogger(__name__)

Edge = tuple[int, int]

# Local edges, the refinement edge first
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


@dataclass(frozen=True, eq=False)
class TriMesh:
    """
    Immutable triangulation of the square.

    Attributes:
        vertices: ``(V, 2)`` coordinates.
        triangles: ``(T, 3)`` counterclockwise vertex ids; ``(v0, v1)`` is the
            refinement edge, ``v2`` the newest vertex.
        generations: ``(T,)`` number of bisections since the initial mesh.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    generations: np.ndarray

    kind = "tri"
    ref_edge = 0

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def corners(self) -> np.ndarray:
        """``(T, 3, 2)`` vertex coordinates per triangle."""
        return self.vertices[self.triangles]

    def signed_areas(self) -> np.ndarray:
        p = self.corners()
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas())

    def diameters(self) -> np.ndarray:
        p = self.corners()
        lengths = [np.linalg.norm(p[:, j] - p[:, i], axis=1) for i, j in LOCAL_EDGES]
        return np.max(np.stack(lengths, axis=1), axis=1)

    def h_max(self) -> float:
        return float(self.diameters().max())

    def min_angles(self) -> np.ndarray:
        """Smallest interior angle of each triangle, in radians."""
        p = self.corners()
        angles = []
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            cos = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
        return np.min(np.stack(angles, axis=1), axis=1)

    def edge_table(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Unique edges and the triangle-to-edge map.

        Returns:
            ``(edges, tri_edges)``: ``(E, 2)`` sorted vertex pairs and ``(T, 3)``
            edge ids for the local edges ``(0, 1), (1, 2), (2, 0)``.
        """
        local = np.concatenate([self.triangles[:, [i, j]] for i, j in LOCAL_EDGES], axis=0)
        local.sort(axis=1)
        edges, inverse = np.unique(local, axis=0, return_inverse=True)
        tri_edges = inverse.ravel().reshape(3, -1).T
        return edges, tri_edges

    def boundary_edge_mask(self, edges: np.ndarray) -> np.ndarray:
        """True for edges on the boundary of the square."""
        a, b = self.vertices[edges[:, 0]], self.vertices[edges[:, 1]]
        on_x = (np.abs(a[:, 0]) == 1.0) & (a[:, 0] == b[:, 0])
        on_y = (np.abs(a[:, 1]) == 1.0) & (a[:, 1] == b[:, 1])
        return on_x | on_y


# =============================================================================
# CONSTRUCTION
# =============================================================================


def _orient(vertices: np.ndarray, tri: list[int]) -> list[int]:
    """Order ``tri`` with its longest edge first and counterclockwise."""
    p = vertices[tri]
    candidates = []
    for i, j in LOCAL_EDGES:
        length = float(np.sum((p[j] - p[i]) ** 2))
        pair = tuple(sorted((tri[i], tri[j])))
        candidates.append((-length, pair, (i, j)))
    candidates.sort()
    i, j = candidates[0][2]
    k = 3 - i - j
    a, b, c = tri[i], tri[j], tri[k]
    pa, pb, pc = vertices[a], vertices[b], vertices[c]
    cross = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])
    if cross < 0:
        a, b = b, a
    return [a, b, c]


def _criss_grid(xs: np.ndarray, ys: np.ndarray) -> TriMesh:
    nx, ny = len(xs) - 1, len(ys) - 1
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i: int, j: int) -> int:
        return i * (ny + 1) + j

    triangles = []
    for i in range(nx):
        for j in range(ny):
            sw, se, ne, nw = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            triangles.append(_orient(vertices, [sw, se, ne]))
            triangles.append(_orient(vertices, [sw, ne, nw]))
    triangles_arr = np.array(triangles, dtype=np.int64)
    return TriMesh(vertices, triangles_arr, np.zeros(len(triangles_arr), dtype=np.int64))


def initial_tri_mesh(n: Optional[int] = None, cross: Optional[tuple[float, float]] = None):
    """
    Build an initial triangulation of ``(-1, 1)^2``.

    Every rectangle of a tensor grid is split by its SW-NE ("criss")
    diagonal. The refinement edge of each triangle is its longest edge,
    ties broken by the lowest vertex-id pair.

    Args:
        n: Uniform ``n x n`` grid of squares (``2 n^2`` triangles).
        cross: Four rectangles meeting at this interior point (8 triangles).

    Returns:
        TriMesh.

    Raises:
        ParameterError: For ``n < 1``, a point not strictly inside the square,
            or when both or neither option is given.
    """
    if (n is None) == (cross is None):
        raise ParameterError("give exactly one of n and cross")
    if n is not None:
        if n < 1:
            raise ParameterError(f"n must be at least 1, got {n}")
        breaks = np.linspace(-1.0, 1.0, n + 1)
        return _criss_grid(breaks, breaks)
    px, py = (float(v) for v in cross)
    if not (-1.0 < px < 1.0 and -1.0 < py < 1.0):
        raise ParameterError(f"cross point {cross} must lie strictly inside the square")
    return _criss_grid(np.array([-1.0, px, 1.0]), np.array([-1.0, py, 1.0]))


# =============================================================================
# NEWEST-VERTEX BISECTION
# =============================================================================


def _key(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


def nvb_refine(mesh: TriMesh, marked) -> TriMesh:
    """
    Bisect marked triangles with newest-vertex bisection and conforming closure.

    The refinement edges of marked triangles are marked; then, until nothing
    changes, every triangle with a marked edge has its refinement edge
    marked. Each triangle is bisected once, twice or three times according
    to its marked edges, and midpoints are shared across neighbors.

    Args:
        mesh: Current mesh.
        marked: Iterable of triangle indices.

    Returns:
        Refined conforming mesh; existing vertex ids are preserved.
    """
    marked = sorted({int(t) for t in marked})
    if marked and (marked[0] < 0 or marked[-1] >= mesh.n_triangles):
        raise ParameterError("marked triangle index out of range")
    if not marked:
        return mesh

    tris = mesh.triangles.tolist()
    edge_tris: dict[Edge, list[int]] = {}
    for t, (a, b, c) in enumerate(tris):
        for e in (_key(a, b), _key(b, c), _key(c, a)):
            edge_tris.setdefault(e, []).append(t)

    marked_edges: set[Edge] = set()
    work = []
    for t in marked:
        e = _key(tris[t][0], tris[t][1])
        if e not in marked_edges:
            marked_edges.add(e)
            work.append(e)
    while work:
        e = work.pop()
        for t in edge_tris[e]:
            ref = _key(tris[t][0], tris[t][1])
            if ref not in marked_edges:
                marked_edges.add(ref)
                work.append(ref)

    vertices = [row for row in mesh.vertices]
    midpoint: dict[Edge, int] = {}
    for e in sorted(marked_edges):
        midpoint[e] = len(vertices)
        vertices.append(0.5 * (mesh.vertices[e[0]] + mesh.vertices[e[1]]))

    new_tris: list[tuple[int, int, int]] = []
    new_gens: list[int] = []

    def bisect(a: int, b: int, c: int, gen: int) -> None:
        m = midpoint.get(_key(a, b))
        if m is None:
            new_tris.append((a, b, c))
            new_gens.append(gen)
            return
        bisect(c, a, m, gen + 1)
        bisect(b, c, m, gen + 1)

    for t in range(mesh.n_triangles):
        a, b, c = tris[t]
        bisect(a, b, c, int(mesh.generations[t]))

    refined = TriMesh(
        np.array(vertices, dtype=float),
        np.array(new_tris, dtype=np.int64),
        np.array(new_gens, dtype=np.int64),
    )
    logger.debug(
        "nvb_refine: %d marked, %d edges bisected, %d -> %d triangles",
        len(marked),
        len(marked_edges),
        mesh.n_triangles,
        refined.n_triangles,
    )
    return refined


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Bisect every triangle twice, so each becomes four."""
    for _ in range(2):
        mesh = nvb_refine(mesh, range(mesh.n_triangles))
    return mesh


def check_conforming(mesh: TriMesh) -> bool:
    """
    Check that the triangulation is conforming and positively oriented.

    Every edge must be shared by at most two triangles, and edges used once
    must lie on the boundary of the square; a vertex in the interior of a
    neighbor's edge leaves an unmatched interior edge and fails the check.
    """
    if mesh.n_triangles == 0:
        return False
    if np.any(mesh.signed_areas() <= 0.0):
        return False
    local = np.concatenate([mesh.triangles[:, [i, j]] for i, j in LOCAL_EDGES], axis=0)
    local.sort(axis=1)
    edges, counts = np.unique(local, axis=0, return_counts=True)
    if np.any(counts > 2):
        return False
    single = edges[counts == 1]
    return bool(np.all(mesh.boundary_edge_mask(single)))
