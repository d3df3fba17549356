"""
Cordes Quadrature - Gauss rules on rectangles and triangles.

Reference domains are the square ``[-1, 1]^2`` (measure 4) and the triangle
with vertices ``(0, 0), (1, 0), (0, 1)`` (measure 1/2). All rule points are
strictly interior, so piecewise data aligned with element boundaries is
never sampled on a discontinuity.

Example:
    >>> rule = gauss_rectangle(3)
    >>> box = np.array([[-1.0, -1.0], [1.0, 1.0]])
    >>> round(integrate(lambda p: p[:, 0] ** 4 * p[:, 1] ** 4, box, rule), 12)
    0.16
"""

import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from cordes.errors import ParameterError

RECTANGLE = "rectangle"
TRIANGLE = "triangle"

REFERENCE_MEASURE = {RECTANGLE: 4.0, TRIANGLE: 0.5}

# Defaults used by the solvers
DEFAULT_RECTANGLE_POINTS = 5
DEFAULT_TRIANGLE_DEGREE = 6

MAX_RECTANGLE_POINTS = 10
MAX_TRIANGLE_DEGREE = 10


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Quadrature rule on a reference element.

    Attributes:
        points: ``(Q, 2)`` reference points.
        weights: ``(Q,)`` weights summing to the reference measure.
        kind: ``rectangle`` or ``triangle``.
        degree: Exactness degree (per direction for rectangles, total for triangles).
    """

    points: np.ndarray
    weights: np.ndarray
    kind: str
    degree: int

    def __post_init__(self):
        if self.kind not in REFERENCE_MEASURE:
            raise ParameterError(f"unknown reference domain '{self.kind}'")
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.weights)


# =============================================================================
# RULE CONSTRUCTION
# =============================================================================


@lru_cache(maxsize=None)
def gauss_rectangle(n: int = DEFAULT_RECTANGLE_POINTS) -> QuadratureRule:
    """
    Tensor Gauss-Legendre rule on ``[-1, 1]^2``.

    Args:
        n: Points per direction, 1 to 10.

    Returns:
        Rule with ``n^2`` points, exact for degree ``2n - 1`` in each variable.

    Raises:
        ParameterError: If ``n`` is out of range.
    """
    if not 1 <= n <= MAX_RECTANGLE_POINTS:
        raise ParameterError(f"points per direction must lie in [1, {MAX_RECTANGLE_POINTS}]")
    x, w = leggauss(n)
    px, py = np.meshgrid(x, x, indexing="ij")
    points = np.column_stack([px.ravel(), py.ravel()])
    weights = np.outer(w, w).ravel()
    return QuadratureRule(points, weights, RECTANGLE, 2 * n - 1)


@lru_cache(maxsize=None)
def gauss_triangle(degree: int = DEFAULT_TRIANGLE_DEGREE, symmetric: bool = True) -> QuadratureRule:
    """
    Gauss rule on the reference triangle, exact up to a total degree.

    The rule collapses the square onto the triangle and uses Gauss-Jacobi
    points in the collapsed direction. With ``symmetric=True`` it is averaged
    over the six vertex permutations so that it is invariant under the
    symmetries of the triangle; ``symmetric=False`` returns the compact rule
    the solvers use.

    Args:
        degree: Total polynomial degree, 1 to 10.
        symmetric: Symmetrize over vertex permutations.

    Returns:
        QuadratureRule on the reference triangle.

    Raises:
        ParameterError: If ``degree`` is out of range.
    """
    if not 1 <= degree <= MAX_TRIANGLE_DEGREE:
        raise ParameterError(f"triangle rule degree must lie in [1, {MAX_TRIANGLE_DEGREE}]")
    m = math.ceil((degree + 1) / 2)
    t, wt = roots_jacobi(m, 1.0, 0.0)
    s, ws = leggauss(m)
    xi = 0.5 * (1.0 + t)
    eta = 0.5 * (1.0 + s)
    px = np.repeat(xi, m)
    py = np.tile(eta, m) * (1.0 - px)
    weights = np.outer(wt, ws).ravel() / 8.0
    points = np.column_stack([px, py])

    if symmetric:
        bary = np.column_stack([1.0 - px - py, px, py])
        perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
        points = np.vstack([bary[:, [p[1], p[2]]] for p in perms])
        weights = np.tile(weights, len(perms)) / len(perms)

    return QuadratureRule(points, weights, TRIANGLE, degree)


def _red_children(tri: np.ndarray) -> list[np.ndarray]:
    p0, p1, p2 = tri
    m01, m12, m02 = 0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p0 + p2)
    return [
        np.array([p0, m01, m02]),
        np.array([m01, p1, m12]),
        np.array([m02, m12, p2]),
        np.array([m12, m02, m01]),
    ]


def composite_rule(rule: QuadratureRule, subdivision: int) -> QuadratureRule:
    """
    Replicate a rule on ``4^s`` congruent children of the reference element.

    Rectangles are split on a uniform ``2^s x 2^s`` grid and triangles by
    ``s`` rounds of red refinement.

    Args:
        rule: Base rule.
        subdivision: Number of four-splits ``s >= 0``.

    Returns:
        Composite rule on the same reference element.
    """
    if subdivision < 0:
        raise ParameterError("subdivision must be non-negative")
    if subdivision == 0:
        return rule
    return _composite_cached(rule, subdivision)


@lru_cache(maxsize=64)
def _composite_cached(rule: QuadratureRule, subdivision: int) -> QuadratureRule:
    scale = 4.0**-subdivision
    if rule.kind == RECTANGLE:
        k = 2**subdivision
        centers = -1.0 + (2.0 * np.arange(k) + 1.0) / k
        cx, cy = np.meshgrid(centers, centers, indexing="ij")
        offsets = np.column_stack([cx.ravel(), cy.ravel()])
        points = (offsets[:, None, :] + rule.points[None, :, :] / k).reshape(-1, 2)
    else:
        tris = [np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])]
        for _ in range(subdivision):
            tris = [child for t in tris for child in _red_children(t)]
        verts = np.array(tris)
        points = map_triangle_points(rule, verts).reshape(-1, 2)
    weights = np.tile(rule.weights, 4**subdivision) * scale
    return QuadratureRule(points, weights, rule.kind, rule.degree)


def default_rule(kind: str) -> QuadratureRule:
    """Default solver rule for ``rectangle`` or ``triangle`` elements."""
    if kind == RECTANGLE:
        return gauss_rectangle(DEFAULT_RECTANGLE_POINTS)
    if kind == TRIANGLE:
        return gauss_triangle(DEFAULT_TRIANGLE_DEGREE, symmetric=False)
    raise ParameterError(f"unknown element kind '{kind}'")


# =============================================================================
# ELEMENT MAPS
# =============================================================================


def map_rectangle_points(rule: QuadratureRule, lower: np.ndarray, upper: np.ndarray):
    """
    Map a rectangle rule onto axis-aligned boxes.

    Args:
        rule: Rule on ``[-1, 1]^2``.
        lower: ``(E, 2)`` lower-left corners.
        upper: ``(E, 2)`` upper-right corners.

    Returns:
        ``(points, weights)`` with shapes ``(E, Q, 2)`` and ``(E, Q)``.
    """
    lower = np.atleast_2d(lower)
    upper = np.atleast_2d(upper)
    half = 0.5 * (upper - lower)
    mid = 0.5 * (upper + lower)
    points = mid[:, None, :] + half[:, None, :] * rule.points[None, :, :]
    weights = rule.weights[None, :] * (half[:, 0] * half[:, 1])[:, None]
    return points, weights


def map_triangle_points(rule: QuadratureRule, vertices: np.ndarray) -> np.ndarray:
    """Map reference-triangle points onto ``(E, 3, 2)`` triangles, giving ``(E, Q, 2)``."""
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim == 2:
        vertices = vertices[None]
    v0 = vertices[:, 0, :]
    e1 = vertices[:, 1, :] - v0
    e2 = vertices[:, 2, :] - v0
    return (
        v0[:, None, :]
        + rule.points[None, :, 0:1] * e1[:, None, :]
        + rule.points[None, :, 1:2] * e2[:, None, :]
    )


def map_triangle(rule: QuadratureRule, vertices: np.ndarray):
    """
    Map a triangle rule onto triangles.

    Returns:
        ``(points, weights)`` with shapes ``(E, Q, 2)`` and ``(E, Q)``.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim == 2:
        vertices = vertices[None]
    e1 = vertices[:, 1, :] - vertices[:, 0, :]
    e2 = vertices[:, 2, :] - vertices[:, 0, :]
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return map_triangle_points(rule, vertices), rule.weights[None, :] * det[:, None]


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    geometry: np.ndarray,
    rule: QuadratureRule,
    subdivision: int = 0,
) -> float:
    """
    Integrate ``f`` over one element.

    Args:
        f: Vectorized integrand mapping ``(N, 2)`` points to ``(N,)`` values.
        geometry: ``[[xmin, ymin], [xmax, ymax]]`` for a rectangle or the
            ``(3, 2)`` vertex array of a triangle.
        rule: Rule whose kind matches the element.
        subdivision: Apply the rule on ``4^s`` congruent children.

    Returns:
        Approximate integral.
    """
    geometry = np.asarray(geometry, dtype=float)
    rule = composite_rule(rule, subdivision)
    if rule.kind == RECTANGLE:
        if geometry.shape != (2, 2):
            raise ParameterError("rectangle geometry must be [[xmin, ymin], [xmax, ymax]]")
        points, weights = map_rectangle_points(rule, geometry[0][None], geometry[1][None])
    else:
        if geometry.shape != (3, 2):
            raise ParameterError("triangle geometry must be a (3, 2) vertex array")
        points, weights = map_triangle(rule, geometry)
    values = np.asarray(f(points[0]), dtype=float)
    return float(np.dot(weights[0], values))
