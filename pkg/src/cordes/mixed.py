"""
Cordes Mixed - Stabilized Taylor-Hood discretization on triangles.

The gradient ``w = grad u`` is approximated by continuous piecewise
quadratic vector fields with vanishing tangential trace, the constraint
``rot w = 0`` by a continuous piecewise affine multiplier with zero mean,
and ``u`` is recovered afterwards from a Poisson projection in the
continuous piecewise quadratics vanishing on the boundary.

Example:
    >>> from cordes.coefficients import BUILTIN_COEFFICIENTS, derived_constants
    >>> from cordes.mesh_tri import initial_tri_mesh
    >>> field = BUILTIN_COEFFICIENTS["identity"]
    >>> spaces = build_th_spaces(initial_tri_mesh(n=2))
    >>> stab = derived_constants(field, "ls", 1.0)
    >>> sol = solve_mixed(spaces, field, "ls", stab, lambda p: 0.0 * p[:, 0])
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from cordes.coefficients import (
    CoefficientField,
    Formulation,
    StabilizationParams,
    entries_gamma,
)
from cordes.errors import ParameterError
from cordes.mesh_tri import TriMesh
from cordes.quadrature import TRIANGLE, QuadratureRule, default_rule, map_triangle
from cordes.sparse import SparseMatrix, TripletList, compress, solve_direct

logger = logging.getLogger(__name__)

Source = Callable[[np.ndarray], np.ndarray]

# Local P2 edge nodes follow the local edges (0, 1), (1, 2), (2, 0)
_EDGE_PAIRS = ((0, 1), (1, 2), (2, 0))


# =============================================================================
# SPACES
# =============================================================================


@dataclass(frozen=True, eq=False)
class ThSpaces:
    """
    Taylor-Hood spaces on a conforming triangulation.

    Attributes:
        mesh: Triangulation.
        nodes: ``(N2, 2)`` P2 node coordinates, vertices first, then edge midpoints.
        elem_nodes: ``(T, 6)`` P2 node ids per triangle.
        w_free: Raw W dofs ``2 * node + component`` that are free.
        s_free: P2 nodes not on the boundary.
    """

    mesh: TriMesh
    nodes: np.ndarray
    elem_nodes: np.ndarray
    w_free: np.ndarray
    s_free: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_w(self) -> int:
        return len(self.w_free)

    @property
    def n_q(self) -> int:
        """Number of P1 coefficients (one per vertex)."""
        return self.mesh.n_vertices

    @property
    def n_s(self) -> int:
        return len(self.s_free)

    @property
    def ndof(self) -> int:
        """``dim W_h + dim Q_h``, with the zero-mean constraint counted."""
        return self.n_w + self.n_q - 1

    def w_selection(self) -> sp.csr_matrix:
        n_raw = 2 * self.n_nodes
        return sp.csr_matrix(
            (np.ones(self.n_w), (self.w_free, np.arange(self.n_w))), shape=(n_raw, self.n_w)
        )

    def s_selection(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (np.ones(self.n_s), (self.s_free, np.arange(self.n_s))), shape=(self.n_nodes, self.n_s)
        )

    def w_element_dofs(self, cells: Optional[np.ndarray] = None) -> np.ndarray:
        """``(T, 12)`` raw W dofs with local index ``2 * node + component``."""
        nodes = self.elem_nodes if cells is None else self.elem_nodes[cells]
        return (2 * nodes[:, :, None] + np.arange(2)[None, None, :]).reshape(len(nodes), 12)

    def basis_at(self, rule: QuadratureRule, cells: Optional[np.ndarray] = None) -> "P2Basis":
        if rule.kind != TRIANGLE:
            raise ParameterError("Taylor-Hood assembly needs a triangle quadrature rule")
        corners = self.mesh.corners()
        if cells is not None:
            corners = corners[cells]
        return p2_basis(rule, corners)


def build_th_spaces(mesh: TriMesh) -> ThSpaces:
    """
    Build the Taylor-Hood spaces of a conforming triangulation.

    On ``y = +-1`` the first component of W vanishes, on ``x = +-1`` the
    second; both vanish at the corners. S_h drops all boundary nodes.

    Args:
        mesh: Conforming triangulation.

    Returns:
        ThSpaces.
    """
    edges, tri_edges = mesh.edge_table()
    n_v = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    nodes = np.vstack([mesh.vertices, midpoints])
    elem_nodes = np.hstack([mesh.triangles, n_v + tri_edges])

    on_x = np.abs(nodes[:, 0]) == 1.0
    on_y = np.abs(nodes[:, 1]) == 1.0
    fixed = np.zeros(2 * len(nodes), dtype=bool)
    fixed[0::2] = on_y
    fixed[1::2] = on_x
    w_free = np.flatnonzero(~fixed)
    s_free = np.flatnonzero(~(on_x | on_y))
    spaces = ThSpaces(mesh=mesh, nodes=nodes, elem_nodes=elem_nodes, w_free=w_free, s_free=s_free)
    logger.debug(
        "Taylor-Hood spaces: %d triangles, dim W=%d, dim Q=%d, dim S=%d",
        mesh.n_triangles,
        spaces.n_w,
        spaces.n_q - 1,
        spaces.n_s,
    )
    return spaces


# =============================================================================
# BASIS FUNCTIONS
# =============================================================================


@dataclass
class P2Basis:
    """
    P1 and P2 basis values at mapped quadrature points.

    Attributes:
        points: ``(E, Q, 2)`` physical points.
        weights: ``(E, Q)`` physical weights.
        lam: ``(Q, 3)`` barycentric coordinates (the P1 basis).
        psi: ``(Q, 6)`` P2 basis values.
        dpsi: ``(E, Q, 6, 2)`` P2 basis gradients.
    """

    points: np.ndarray
    weights: np.ndarray
    lam: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray


def p2_basis(rule: QuadratureRule, corners: np.ndarray) -> P2Basis:
    """Evaluate P1 and P2 bases on ``(E, 3, 2)`` triangles."""
    points, weights = map_triangle(rule, corners)
    x, y = rule.points[:, 0], rule.points[:, 1]
    lam = np.column_stack([1.0 - x - y, x, y])

    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)

    psi = np.empty((len(x), 6))
    dpsi = np.empty((len(corners), len(x), 6, 2))
    for i in range(3):
        psi[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        dpsi[:, :, i, :] = (4.0 * lam[:, i] - 1.0)[None, :, None] * grads[:, None, i, :]
    for k, (i, j) in enumerate(_EDGE_PAIRS):
        psi[:, 3 + k] = 4.0 * lam[:, i] * lam[:, j]
        dpsi[:, :, 3 + k, :] = 4.0 * (
            lam[:, j][None, :, None] * grads[:, None, i, :]
            + lam[:, i][None, :, None] * grads[:, None, j, :]
        )
    return P2Basis(points=points, weights=weights, lam=lam, psi=psi, dpsi=dpsi)


def _vector_operators(basis: P2Basis, entries: np.ndarray):
    """``A:D phi``, ``div phi`` and ``rot phi`` for the 12 local vector basis functions."""
    px, py = basis.dpsi[..., 0], basis.dpsi[..., 1]
    a11, a12, a22 = (entries[..., k][..., None] for k in range(3))
    shape = px.shape[:-1] + (12,)
    ad, div, rot = np.empty(shape), np.empty(shape), np.empty(shape)
    ad[..., 0::2] = a11 * px + a12 * py
    ad[..., 1::2] = a12 * px + a22 * py
    div[..., 0::2] = px
    div[..., 1::2] = py
    rot[..., 0::2] = -py
    rot[..., 1::2] = px
    return ad, div, rot


# =============================================================================
# SOLUTION
# =============================================================================


@dataclass
class MixedFields:
    """Mixed solution fields at mapped quadrature points."""

    points: np.ndarray
    weights: np.ndarray
    u: np.ndarray
    grad_u: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    p: np.ndarray

    def rot_w(self) -> np.ndarray:
        return self.dw[..., 1, 0] - self.dw[..., 0, 1]

    def div_w(self) -> np.ndarray:
        return self.dw[..., 0, 0] + self.dw[..., 1, 1]

    def contract(self, entries: np.ndarray) -> np.ndarray:
        """``A : D w`` for ``(E, Q, 3)`` entries."""
        dw = self.dw
        return (
            entries[..., 0] * dw[..., 0, 0]
            + entries[..., 1] * (dw[..., 0, 1] + dw[..., 1, 0])
            + entries[..., 2] * dw[..., 1, 1]
        )


@dataclass(frozen=True, eq=False)
class MixedSolution:
    """
    Discrete triple ``(u_h, w_h, p_h)`` plus the zero-mean multiplier.

    Attributes:
        spaces: Taylor-Hood spaces.
        w: Free W coefficients.
        p: P1 coefficients, one per vertex.
        multiplier: Lagrange scalar of the zero-mean constraint.
        u: Free S coefficients.
    """

    spaces: ThSpaces
    w: np.ndarray
    p: np.ndarray
    multiplier: float
    u: np.ndarray

    def fields_at(self, rule: QuadratureRule, cells: Optional[np.ndarray] = None) -> MixedFields:
        spaces = self.spaces
        basis = spaces.basis_at(rule, cells)
        elem_nodes = spaces.elem_nodes if cells is None else spaces.elem_nodes[cells]
        w_nodes = (spaces.w_selection() @ self.w).reshape(-1, 2)[elem_nodes]
        u_nodes = (spaces.s_selection() @ self.u)[elem_nodes]
        tri = spaces.mesh.triangles if cells is None else spaces.mesh.triangles[cells]
        p_nodes = self.p[tri]

        w = np.einsum("qa,eac->eqc", basis.psi, w_nodes)
        dw = np.einsum("eqad,eac->eqcd", basis.dpsi, w_nodes)
        u = np.einsum("qa,ea->eq", basis.psi, u_nodes)
        grad_u = np.einsum("eqad,ea->eqd", basis.dpsi, u_nodes)
        p = np.einsum("qa,ea->eq", basis.lam, p_nodes)
        return MixedFields(basis.points, basis.weights, u, grad_u, w, dw, p)

    def multiplier_norm(self, rule: Optional[QuadratureRule] = None) -> float:
        """``||p_h||`` in L2."""
        fields = self.fields_at(rule or default_rule(TRIANGLE))
        return float(np.sqrt(np.sum(fields.weights * fields.p**2)))


# =============================================================================
# ASSEMBLY AND SOLVE
# =============================================================================


def assemble_mixed(
    spaces: ThSpaces,
    coeff: CoefficientField,
    formulation: Union[Formulation, str],
    stab: StabilizationParams,
    f: Source,
    rule: Optional[QuadratureRule] = None,
) -> tuple[SparseMatrix, np.ndarray]:
    """
    Assemble the stabilized saddle-point system.

    The unknowns are ordered ``(w, p, multiplier)`` and the matrix is
    ``[[A~, B^T, 0], [B, 0, m], [0, m^T, 0]]`` with
    ``A~[i, j] = (A:D phi_j, tau(phi_i)) + sigma^2 (rot phi_j, rot phi_i)``,
    ``B[k, j] = (rot phi_j, lambda_k)`` and ``m_k = (1, lambda_k)``.

    Raises:
        ParameterError: If ``stab`` belongs to another formulation.
    """
    formulation = Formulation.parse(formulation)
    if stab.formulation is not formulation:
        raise ParameterError(
            f"stabilization built for {stab.formulation.value}, not {formulation.value}"
        )
    rule = rule or default_rule(TRIANGLE)
    basis = spaces.basis_at(rule)
    weights = basis.weights
    entries = coeff.values(basis.points)
    ad, div, rot = _vector_operators(basis, entries)
    if formulation is Formulation.LS:
        test = ad
    else:
        test = entries_gamma(entries)[..., None] * div

    a_blocks = np.einsum("eq,eqi,eqj->eij", weights, test, ad)
    a_blocks += stab.sigma_lambda**2 * np.einsum("eq,eqi,eqj->eij", weights, rot, rot)
    b_blocks = np.einsum("eq,qk,eqj->ekj", weights, basis.lam, rot)
    m_local = np.einsum("eq,qk->ek", weights, basis.lam)
    values = f(basis.points.reshape(-1, 2)).reshape(weights.shape)
    loads = np.einsum("eq,eq,eqi->ei", weights, values, test)

    n_raw = 2 * spaces.n_nodes
    w_dofs = spaces.w_element_dofs()
    tri = spaces.mesh.triangles

    triplets = TripletList((n_raw, n_raw))
    triplets.add_dense_blocks(w_dofs, w_dofs, a_blocks)
    b_triplets = TripletList((spaces.n_q, n_raw))
    b_triplets.add_dense_blocks(tri, w_dofs, b_blocks)

    sel = spaces.w_selection()
    a_mat = sel.T @ compress(triplets).csr @ sel
    b_mat = compress(b_triplets).csr @ sel
    m_vec = np.bincount(tri.ravel(), weights=m_local.ravel(), minlength=spaces.n_q)
    m_col = sp.csr_matrix(m_vec[:, None])

    matrix = sp.bmat([[a_mat, b_mat.T, None], [b_mat, None, m_col], [None, m_col.T, None]])
    rhs_w = sel.T @ np.bincount(w_dofs.ravel(), weights=loads.ravel(), minlength=n_raw)
    rhs = np.concatenate([rhs_w, np.zeros(spaces.n_q + 1)])
    result = SparseMatrix.from_scipy(matrix)
    logger.debug(
        "assembled Taylor-Hood %s system: size=%d nnz=%d", formulation.value, len(rhs), result.nnz
    )
    return result, rhs


def recover_primal(
    spaces: ThSpaces,
    w: np.ndarray,
    rule: Optional[QuadratureRule] = None,
    check: bool = False,
) -> np.ndarray:
    """
    Solve ``(grad u_h - w, grad z_h) = 0`` for all ``z_h`` in S_h.

    Args:
        spaces: Taylor-Hood spaces.
        w: Free W coefficients, or ``(T, Q, 2)`` values of any field at the
            points of ``rule`` mapped onto each triangle.
        rule: Triangle rule, default degree 6.

    Returns:
        Free S coefficients of ``u_h``.
    """
    rule = rule or default_rule(TRIANGLE)
    basis = spaces.basis_at(rule)
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w_nodes = (spaces.w_selection() @ w).reshape(-1, 2)[spaces.elem_nodes]
        w_values = np.einsum("qa,eac->eqc", basis.psi, w_nodes)
    else:
        w_values = w

    stiffness = np.einsum("eq,eqad,eqbd->eab", basis.weights, basis.dpsi, basis.dpsi)
    loads = np.einsum("eq,eqad,eqd->ea", basis.weights, basis.dpsi, w_values)
    triplets = TripletList((spaces.n_nodes, spaces.n_nodes))
    triplets.add_dense_blocks(spaces.elem_nodes, spaces.elem_nodes, stiffness)
    sel = spaces.s_selection()
    matrix = SparseMatrix.from_scipy(sel.T @ compress(triplets).csr @ sel)
    rhs = sel.T @ np.bincount(
        spaces.elem_nodes.ravel(), weights=loads.ravel(), minlength=spaces.n_nodes
    )
    return solve_direct(matrix, rhs, check=check)


def solve_mixed(
    spaces: ThSpaces,
    coeff: CoefficientField,
    formulation: Union[Formulation, str],
    stab: StabilizationParams,
    f: Source,
    rule: Optional[QuadratureRule] = None,
    check: bool = False,
) -> MixedSolution:
    """
    Solve the saddle-point system and recover the primal variable.

    Raises:
        ParameterError: On a stabilization/formulation mismatch.
        SolverError: If a linear solve fails.
    """
    matrix, rhs = assemble_mixed(spaces, coeff, formulation, stab, f, rule)
    x = solve_direct(matrix, rhs, check=check)
    n_w, n_q = spaces.n_w, spaces.n_q
    w = x[:n_w]
    p = x[n_w : n_w + n_q]
    u = recover_primal(spaces, w, rule, check=check)
    return MixedSolution(spaces=spaces, w=w, p=p, multiplier=float(x[-1]), u=u)


def constraint_residual(solution: MixedSolution, rule: Optional[QuadratureRule] = None):
    """``b(w_h, lambda_k)`` for every P1 basis function ``lambda_k``."""
    rule = rule or default_rule(TRIANGLE)
    fields = solution.fields_at(rule)
    lam = solution.spaces.basis_at(rule).lam
    local = np.einsum("eq,eq,qk->ek", fields.weights, fields.rot_w(), lam)
    tri = solution.spaces.mesh.triangles
    return np.bincount(tri.ravel(), weights=local.ravel(), minlength=solution.spaces.n_q)
