"""
Cordes BFS - Conforming C1 discretization with Bogner-Fox-Schmit rectangles.

Each mesh vertex carries four raw degrees of freedom: the value and the
derivatives ``d1``, ``d2`` and ``d12`` (unscaled, in global coordinates).
Boundary and hanging-vertex constraints are eliminated through a sparse
matrix ``T`` from free to raw coefficients, so the discrete space is a
subspace of H^1_0 intersected with H^2. Free coefficients are the vertex
data scaled by the local mesh size (``h d1``, ``h d2``, ``h^2 d12``), which
keeps the four unknowns of a vertex on one scale on graded meshes.

Example:
    >>> from cordes.mesh_quad import initial_quad_mesh
    >>> space = build_bfs_space(initial_quad_mesh(n=2))
    >>> space.ndof
    16
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from cordes.coefficients import CoefficientField, Formulation, SymMatrix2, entries_gamma
from cordes.errors import ParameterError
from cordes.mesh_quad import HORIZONTAL, QuadMesh, hanging_constraints
from cordes.quadrature import RECTANGLE, QuadratureRule, default_rule, map_rectangle_points
from cordes.sparse import SparseMatrix, TripletList, compress, solve_direct

logger = logging.getLogger(__name__)

Source = Callable[[np.ndarray], np.ndarray]

# Raw dof types per vertex
VALUE, D1, D2, D12 = 0, 1, 2, 3

# Local basis b = 4 * corner + type; corner offsets in SW, SE, NE, NW order
_CORNER_X = np.repeat([0, 1, 1, 0], 4)
_CORNER_Y = np.repeat([0, 0, 1, 1], 4)
_DX = np.tile([0, 1, 0, 1], 4)
_DY = np.tile([0, 0, 1, 1], 4)
_FX = 2 * _CORNER_X + _DX
_FY = 2 * _CORNER_Y + _DY


# =============================================================================
# REFERENCE BASIS
# =============================================================================


def _hermite_1d(s: np.ndarray):
    """Cubic Hermite functions h00, h10, h01, h11 on [0, 1] and two derivatives."""
    s2, s3 = s * s, s * s * s
    val = np.stack([2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s, -2 * s3 + 3 * s2, s3 - s2], axis=-1)
    d1 = np.stack([6 * s2 - 6 * s, 3 * s2 - 4 * s + 1, -6 * s2 + 6 * s, 3 * s2 - 2 * s], axis=-1)
    d2 = np.stack([12 * s - 6, 6 * s - 4, -12 * s + 6, 6 * s - 2], axis=-1)
    return val, d1, d2


@dataclass
class BfsBasis:
    """BFS basis functions and derivatives, each of shape ``(E, Q, 16)``."""

    phi: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dxx: np.ndarray
    dxy: np.ndarray
    dyy: np.ndarray

    def contract(self, entries: np.ndarray) -> np.ndarray:
        """``A : D^2 phi`` for ``(E, Q, 3)`` coefficient entries."""
        a = entries[..., None]
        return a[..., 0, :] * self.dxx + 2.0 * a[..., 1, :] * self.dxy + a[..., 2, :] * self.dyy

    def laplacian(self) -> np.ndarray:
        return self.dxx + self.dyy


def bfs_basis(s: np.ndarray, t: np.ndarray, hx: np.ndarray, hy: np.ndarray) -> BfsBasis:
    """
    Evaluate the 16 local BFS basis functions.

    Args:
        s: ``(E, Q)`` local x coordinates in [0, 1].
        t: ``(E, Q)`` local y coordinates in [0, 1].
        hx: ``(E,)`` cell widths.
        hy: ``(E,)`` cell heights.

    Returns:
        BfsBasis with derivatives in global coordinates.
    """
    hx = np.asarray(hx, dtype=float)[:, None, None]
    hy = np.asarray(hy, dtype=float)[:, None, None]
    xv, x1, x2 = _hermite_1d(s)
    yv, y1, y2 = _hermite_1d(t)
    sx = hx**_DX
    sy = hy**_DY
    xv, x1, x2 = xv[..., _FX] * sx, x1[..., _FX] * sx / hx, x2[..., _FX] * sx / hx**2
    yv, y1, y2 = yv[..., _FY] * sy, y1[..., _FY] * sy / hy, y2[..., _FY] * sy / hy**2
    return BfsBasis(
        phi=xv * yv,
        dx=x1 * yv,
        dy=xv * y1,
        dxx=x2 * yv,
        dxy=x1 * y1,
        dyy=xv * y2,
    )


# =============================================================================
# SPACE
# =============================================================================


@dataclass(frozen=True, eq=False)
class BfsSpace:
    """
    BFS space on a rectangular mesh with constraints eliminated.

    Attributes:
        mesh: Underlying mesh.
        transform: ``(4 V, ndof)`` sparse map from free to raw coefficients.
        free: ``(ndof,)`` raw index of each free dof.
        status: Raw dof status, 0 free, 1 boundary, 2 hanging.
        scale: Raw dof scaling, ``h_v^k`` for a derivative of order ``k``
            at vertex ``v`` with local size ``h_v``.
    """

    mesh: QuadMesh
    transform: sp.csr_matrix
    free: np.ndarray
    status: np.ndarray
    scale: np.ndarray

    @property
    def ndof(self) -> int:
        return len(self.free)

    @property
    def n_raw(self) -> int:
        return 4 * self.mesh.n_vertices

    def cell_dofs(self, cells: Optional[np.ndarray] = None) -> np.ndarray:
        """``(E, 16)`` raw dof ids of the given cells."""
        verts = self.mesh.cells if cells is None else self.mesh.cells[cells]
        return (4 * verts[:, :, None] + np.arange(4)[None, None, :]).reshape(len(verts), 16)

    def basis_at(self, rule: QuadratureRule, cells: Optional[np.ndarray] = None):
        """
        Map a rectangle rule onto cells and evaluate the basis there.

        Returns:
            ``(points, weights, basis)`` with shapes ``(E, Q, 2)``, ``(E, Q)``
            and BfsBasis.
        """
        if rule.kind != RECTANGLE:
            raise ParameterError("BFS assembly needs a rectangle quadrature rule")
        lower, upper = self.mesh.lower, self.mesh.upper
        if cells is not None:
            lower, upper = lower[cells], upper[cells]
        points, weights = map_rectangle_points(rule, lower, upper)
        size = upper - lower
        s = np.broadcast_to(0.5 * (rule.points[:, 0] + 1.0), weights.shape)
        t = np.broadcast_to(0.5 * (rule.points[:, 1] + 1.0), weights.shape)
        return points, weights, bfs_basis(s, t, size[:, 0], size[:, 1])


def build_bfs_space(mesh: QuadMesh) -> BfsSpace:
    """
    Build the constrained BFS space of a rectangular mesh.

    On the sides ``x = +-1`` the value and ``d2`` vanish, on ``y = +-1`` the
    value and ``d1``; ``d12`` stays free everywhere. The four dofs of a
    hanging vertex interpolate the cubic Hermite trace and normal-derivative
    trace of its coarse edge; chains of hanging vertices are resolved
    recursively.

    Args:
        mesh: Rectangular mesh.

    Returns:
        BfsSpace.
    """
    n_raw = 4 * mesh.n_vertices
    status = np.zeros(n_raw, dtype=np.int8)
    bx, by = mesh.boundary_x(), mesh.boundary_y()
    for v in np.flatnonzero(bx):
        status[4 * v + VALUE] = 1
        status[4 * v + D2] = 1
    for v in np.flatnonzero(by):
        status[4 * v + VALUE] = 1
        status[4 * v + D1] = 1

    hanging = {entry.vertex: entry for entry in hanging_constraints(mesh)}
    for v in hanging:
        status[4 * v : 4 * v + 4] = 2

    scale = _vertex_sizes(mesh)[:, None] ** np.array([0, 1, 1, 2])[None, :]
    scale = scale.ravel()

    free = np.flatnonzero(status == 0)
    free_index = -np.ones(n_raw, dtype=np.int64)
    free_index[free] = np.arange(len(free))

    rows_cache: dict[int, dict[int, float]] = {}

    def row(raw: int) -> dict[int, float]:
        cached = rows_cache.get(raw)
        if cached is not None:
            return cached
        if status[raw] == 0:
            result = {int(free_index[raw]): float(scale[raw])}
        elif status[raw] == 1:
            result = {}
        else:
            result = {}
            for source, coeff in _hanging_combination(mesh, hanging[raw // 4], raw % 4):
                for j, c in row(source).items():
                    result[j] = result.get(j, 0.0) + coeff * c
        rows_cache[raw] = result
        return result

    rows, cols, vals = [], [], []
    for raw in range(n_raw):
        for j, c in row(raw).items():
            rows.append(raw)
            cols.append(j)
            vals.append(c)
    transform = sp.csr_matrix((vals, (rows, cols)), shape=(n_raw, len(free)))
    logger.debug(
        "BFS space: %d vertices, %d hanging, %d free dofs",
        mesh.n_vertices,
        len(hanging),
        len(free),
    )
    return BfsSpace(mesh=mesh, transform=transform, free=free, status=status, scale=scale)


def _vertex_sizes(mesh: QuadMesh) -> np.ndarray:
    """Smallest side length of the cells around each vertex."""
    side = np.max(mesh.upper - mesh.lower, axis=1)
    sizes = np.full(mesh.n_vertices, np.inf)
    np.minimum.at(sizes, mesh.cells.ravel(), np.repeat(side, 4))
    return sizes


def _hanging_combination(mesh: QuadMesh, entry, k: int) -> list[tuple[int, float]]:
    """Raw dofs and weights expressing type ``k`` of a hanging vertex."""
    a, b = entry.a, entry.b
    h = float(np.linalg.norm(mesh.vertices[b] - mesh.vertices[a]))
    if entry.orientation == HORIZONTAL:
        tangential, normal = D1, D2
    else:
        tangential, normal = D2, D1
    # value/tangential pair and normal/mixed pair follow the same Hermite rule
    if k in (VALUE, tangential):
        lo, hi = VALUE, tangential
    else:
        lo, hi = normal, D12
    if k in (VALUE, normal):
        weights = (0.5, h / 8.0, 0.5, -h / 8.0)
    else:
        weights = (-1.5 / h, -0.25, 1.5 / h, -0.25)
    return [
        (4 * a + lo, weights[0]),
        (4 * a + hi, weights[1]),
        (4 * b + lo, weights[2]),
        (4 * b + hi, weights[3]),
    ]


# =============================================================================
# DISCRETE FUNCTIONS
# =============================================================================


@dataclass(frozen=True, eq=False)
class DiscreteFunctionH2:
    """Piecewise bicubic C1 function given by free coefficients."""

    space: BfsSpace
    coefficients: np.ndarray

    @property
    def raw(self) -> np.ndarray:
        return self.space.transform @ self.coefficients

    def fields_at(self, rule: QuadratureRule, cells: Optional[np.ndarray] = None):
        """
        Values, gradients and Hessian entries at mapped quadrature points.

        Returns:
            ``(points, weights, value, grad, hess)`` with ``grad`` of shape
            ``(E, Q, 2)`` and ``hess`` of shape ``(E, Q, 3)`` holding
            ``(u11, u12, u22)``.
        """
        points, weights, basis = self.space.basis_at(rule, cells)
        local = self.raw[self.space.cell_dofs(cells)][:, None, :]
        value = np.sum(basis.phi * local, axis=-1)
        grad = np.stack([np.sum(basis.dx * local, -1), np.sum(basis.dy * local, -1)], -1)
        hess = np.stack(
            [
                np.sum(basis.dxx * local, -1),
                np.sum(basis.dxy * local, -1),
                np.sum(basis.dyy * local, -1),
            ],
            -1,
        )
        return points, weights, value, grad, hess

    def evaluate(self, points: np.ndarray, cells: Optional[np.ndarray] = None):
        """
        Evaluate at arbitrary points.

        Args:
            points: ``(N, 2)`` points in the closed square.
            cells: Optional cell index per point; located when omitted.

        Returns:
            ``(value, grad, hess)`` arrays of shapes ``(N,)``, ``(N, 2)``, ``(N, 3)``.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        mesh = self.space.mesh
        if cells is None:
            cells = mesh.locate(points)
        lower, upper = mesh.lower[cells], mesh.upper[cells]
        size = upper - lower
        s = ((points[:, 0] - lower[:, 0]) / size[:, 0])[:, None]
        t = ((points[:, 1] - lower[:, 1]) / size[:, 1])[:, None]
        basis = bfs_basis(s, t, size[:, 0], size[:, 1])
        local = self.raw[self.space.cell_dofs(cells)][:, None, :]
        value = np.sum(basis.phi * local, -1)[:, 0]
        grad = np.stack([np.sum(basis.dx * local, -1), np.sum(basis.dy * local, -1)], -1)[:, 0]
        hess = np.stack(
            [
                np.sum(basis.dxx * local, -1),
                np.sum(basis.dxy * local, -1),
                np.sum(basis.dyy * local, -1),
            ],
            -1,
        )[:, 0]
        return value, grad, hess


def eval_h2(u: DiscreteFunctionH2, point) -> tuple[float, np.ndarray, SymMatrix2]:
    """
    Evaluate a BFS function, its gradient and Hessian at one point.

    Raises:
        DomainError: If the point lies outside the square.
    """
    value, grad, hess = u.evaluate(np.asarray(point, dtype=float)[None, :])
    return float(value[0]), grad[0], SymMatrix2.from_array(hess[0])


# =============================================================================
# ASSEMBLY AND SOLVE
# =============================================================================


def _test_operator(basis: BfsBasis, entries: np.ndarray, formulation: Formulation) -> np.ndarray:
    if formulation is Formulation.LS:
        return basis.contract(entries)
    gamma = entries_gamma(entries)[..., None]
    return gamma * basis.laplacian()


def assemble_conforming(
    space: BfsSpace,
    coeff: CoefficientField,
    formulation: Union[Formulation, str],
    f: Source,
    rule: Optional[QuadratureRule] = None,
) -> tuple[SparseMatrix, np.ndarray]:
    """
    Assemble the conforming system on the free dofs.

    Row ``j`` and column ``i`` hold ``(A:D^2 phi_i, tau(grad phi_j))`` with
    ``tau = gamma div`` (NS) or ``A : D`` (LS); the load vector holds
    ``(f, tau(grad phi_j))``.

    Args:
        space: BFS space.
        coeff: Coefficient field.
        formulation: NS or LS.
        f: Vectorized right-hand side.
        rule: Rectangle rule, default 5x5 Gauss.

    Returns:
        ``(matrix, rhs)`` on the free dofs.
    """
    formulation = Formulation.parse(formulation)
    rule = rule or default_rule(RECTANGLE)
    points, weights, basis = space.basis_at(rule)
    entries = coeff.values(points)
    trial = basis.contract(entries)
    test = _test_operator(basis, entries, formulation)
    blocks = np.einsum("eq,eqi,eqj->eij", weights, test, trial)
    values = f(points.reshape(-1, 2)).reshape(weights.shape)
    loads = np.einsum("eq,eq,eqi->ei", weights, values, test)

    dofs = space.cell_dofs()
    triplets = TripletList((space.n_raw, space.n_raw))
    triplets.add_dense_blocks(dofs, dofs, blocks)
    raw_matrix = compress(triplets).csr
    raw_rhs = np.bincount(dofs.ravel(), weights=loads.ravel(), minlength=space.n_raw)

    t = space.transform
    matrix = SparseMatrix.from_scipy(t.T @ raw_matrix @ t)
    rhs = t.T @ raw_rhs
    logger.debug(
        "assembled BFS %s system: ndof=%d nnz=%d", formulation.value, space.ndof, matrix.nnz
    )
    return matrix, rhs


def solve_conforming(
    space: BfsSpace,
    coeff: CoefficientField,
    formulation: Union[Formulation, str],
    f: Source,
    rule: Optional[QuadratureRule] = None,
    check: bool = False,
) -> DiscreteFunctionH2:
    """
    Solve the conforming problem; for LS this is the least-squares minimizer.

    Raises:
        SolverError: If the linear solve fails.
    """
    matrix, rhs = assemble_conforming(space, coeff, formulation, f, rule)
    coefficients = solve_direct(matrix, rhs, check=check)
    return DiscreteFunctionH2(space, coefficients)


def hermite_interpolant(space: BfsSpace, u, grad, mixed) -> DiscreteFunctionH2:
    """
    Interpolate a smooth function with the BFS vertex data.

    Args:
        space: BFS space.
        u, grad, mixed: Vectorized evaluators of the function, its gradient
            ``(N, 2)`` and the mixed derivative ``d12``.

    Returns:
        The interpolant expressed in the free dofs.
    """
    v = space.mesh.vertices
    raw = np.empty(space.n_raw)
    g = grad(v)
    raw[0::4] = u(v)
    raw[1::4] = g[:, 0]
    raw[2::4] = g[:, 1]
    raw[3::4] = mixed(v)
    return DiscreteFunctionH2(space, raw[space.free] / space.scale[space.free])
