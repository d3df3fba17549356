"""
Cordes Experiments - Benchmark problems, exact solutions and error norms.

Three benchmarks on the square ``(-1, 1)^2``:

1. smooth solution ``u = p(x1) p(x2)`` with ``p(t) = t (1 - exp(1 - |t|))``
   and the sign coefficient;
2. singular solution ``r^{5/3} (1 - r)^{5/2} sin(2 theta / 3)^{5/2}`` on the
   three-quarter disc sector, zero elsewhere;
3. ``f = 1`` with the transformed sign coefficient, no known solution.

Example:
    >>> spec = problem_spec(1, "quad")
    >>> spec.exact.value(np.array([[0.0, 0.3]]))
    array([0.])
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from cordes.bfs import DiscreteFunctionH2
from cordes.coefficients import CoefficientField, get_coefficient
from cordes.errors import DegeneratePointError, ParameterError
from cordes.mesh_quad import QuadMesh, initial_quad_mesh
from cordes.mesh_tri import TriMesh, initial_tri_mesh
from cordes.mixed import MixedSolution
from cordes.quadrature import QuadratureRule, composite_rule

logger = logging.getLogger(__name__)

Source = Callable[[np.ndarray], np.ndarray]
Mesh = Union[QuadMesh, TriMesh]

NON_MATCHING_POINT = (0.1, 0.2)
MATCHING_SIZE = 2
KINK_SUBDIVISION = 2

# Samples per element edge for the kink-cut test
_EDGE_SAMPLES = 9
# Samples are pulled toward the centroid so shared edges belong to no element
_SHRINK = 1e-9


# =============================================================================
# EXACT SOLUTIONS
# =============================================================================


class ExactSolution:
    """
    Exact solution with analytic derivatives.

    Subclasses implement vectorized ``value``, ``gradient`` and ``hessian``
    (entries ``(u11, u12, u22)``) on ``(N, 2)`` arrays, plus ``region`` which
    labels the smooth pieces so elements cut by a kink can be detected.
    """

    name = "exact"

    def value(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, points: np.ndarray, strict: bool = True) -> np.ndarray:
        raise NotImplementedError

    def mixed(self, points: np.ndarray) -> np.ndarray:
        return self.hessian(points, strict=False)[:, 1]

    def region(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, point) -> tuple[float, np.ndarray, np.ndarray]:
        pts = np.asarray(point, dtype=float)[None, :]
        return float(self.value(pts)[0]), self.gradient(pts)[0], self.hessian(pts)[0]


class SmoothSolution(ExactSolution):
    """``u = p(x1) p(x2)`` with ``p(t) = t (1 - exp(1 - |t|))``; kinks on the axes."""

    name = "smooth"

    @staticmethod
    def _p(t):
        return t * (1.0 - np.exp(1.0 - np.abs(t)))

    @staticmethod
    def _dp(t):
        e = np.exp(1.0 - np.abs(t))
        return 1.0 - e + np.abs(t) * e

    @staticmethod
    def _ddp(t):
        return np.sign(t) * np.exp(1.0 - np.abs(t)) * (2.0 - np.abs(t))

    def value(self, points):
        points = np.asarray(points, dtype=float)
        return self._p(points[:, 0]) * self._p(points[:, 1])

    def gradient(self, points):
        points = np.asarray(points, dtype=float)
        x, y = points[:, 0], points[:, 1]
        return np.column_stack([self._dp(x) * self._p(y), self._p(x) * self._dp(y)])

    def hessian(self, points, strict=True):
        points = np.asarray(points, dtype=float)
        x, y = points[:, 0], points[:, 1]
        if strict and np.any((x == 0.0) | (y == 0.0)):
            raise DegeneratePointError("second derivatives are undefined on the axes")
        return np.column_stack(
            [
                self._ddp(x) * self._p(y),
                self._dp(x) * self._dp(y),
                self._p(x) * self._ddp(y),
            ]
        )

    def region(self, points):
        points = np.asarray(points, dtype=float)
        return 2 * (points[:, 0] > 0) + (points[:, 1] > 0)


class SingularSolution(ExactSolution):
    """
    ``r^{5/3} (1 - r)^{5/2} sin(2 theta / 3)^{5/2}`` on ``0 < theta < 3 pi / 2``,
    ``r < 1``, with ``theta`` in ``[0, 2 pi)``; zero elsewhere.
    """

    name = "singular"
    OPENING = 1.5 * math.pi

    def _polar(self, points):
        points = np.asarray(points, dtype=float)
        x, y = points[:, 0], points[:, 1]
        r = np.hypot(x, y)
        theta = np.mod(np.arctan2(y, x), 2.0 * math.pi)
        inside = (r > 0.0) & (r < 1.0) & (theta > 0.0) & (theta < self.OPENING)
        return r, theta, inside

    @staticmethod
    def _radial(r):
        q = np.clip(1.0 - r, 0.0, None)
        rr = np.where(r > 0.0, r, 1.0)
        big_r = rr ** (5 / 3) * q**2.5
        d_r = (5 / 3) * rr ** (2 / 3) * q**2.5 - 2.5 * rr ** (5 / 3) * q**1.5
        dd_r = (
            (10 / 9) * rr ** (-1 / 3) * q**2.5
            - (25 / 3) * rr ** (2 / 3) * q**1.5
            + 3.75 * rr ** (5 / 3) * q**0.5
        )
        return big_r, d_r, dd_r

    @staticmethod
    def _angular(theta):
        s = np.clip(np.sin(2.0 * theta / 3.0), 0.0, None)
        c = np.cos(2.0 * theta / 3.0)
        big_t = s**2.5
        d_t = (5 / 3) * s**1.5 * c
        dd_t = (5 / 3) * (s**0.5 * c**2 - (2 / 3) * s**2.5)
        return big_t, d_t, dd_t

    def value(self, points):
        r, theta, inside = self._polar(points)
        big_r, _, _ = self._radial(r)
        big_t, _, _ = self._angular(theta)
        return np.where(inside, big_r * big_t, 0.0)

    def gradient(self, points):
        r, theta, inside = self._polar(points)
        big_r, d_r, _ = self._radial(r)
        big_t, d_t, _ = self._angular(theta)
        rr = np.where(r > 0.0, r, 1.0)
        c, s = np.cos(theta), np.sin(theta)
        u_r, u_t = d_r * big_t, big_r * d_t
        gx = c * u_r - s / rr * u_t
        gy = s * u_r + c / rr * u_t
        return np.column_stack([np.where(inside, gx, 0.0), np.where(inside, gy, 0.0)])

    def hessian(self, points, strict=True):
        points = np.asarray(points, dtype=float)
        r, theta, inside = self._polar(points)
        if strict:
            on_ray = ((theta == 0.0) | (theta == self.OPENING)) & (r <= 1.0)
            on_arc = (r == 1.0) & (theta <= self.OPENING)
            if np.any((r == 0.0) | on_ray | on_arc):
                raise DegeneratePointError(
                    "second derivatives are undefined on the sector boundary"
                )
        big_r, d_r, dd_r = self._radial(r)
        big_t, d_t, dd_t = self._angular(theta)
        rr = np.where(r > 0.0, r, 1.0)
        c, s = np.cos(theta), np.sin(theta)
        u_r, u_t = d_r * big_t, big_r * d_t
        u_rr, u_rt, u_tt = dd_r * big_t, d_r * d_t, big_r * dd_t
        u_xx = (
            c**2 * u_rr
            + s**2 / rr * u_r
            + s**2 / rr**2 * u_tt
            - 2 * s * c / rr * u_rt
            + 2 * s * c / rr**2 * u_t
        )
        u_yy = (
            s**2 * u_rr
            + c**2 / rr * u_r
            + c**2 / rr**2 * u_tt
            + 2 * s * c / rr * u_rt
            - 2 * s * c / rr**2 * u_t
        )
        u_xy = s * c * (u_rr - u_r / rr - u_tt / rr**2) + (c**2 - s**2) * (u_rt / rr - u_t / rr**2)
        hess = np.column_stack([u_xx, u_xy, u_yy])
        return np.where(inside[:, None], hess, 0.0)

    def region(self, points):
        _, _, inside = self._polar(points)
        return inside.astype(int)


EXACT_SOLUTIONS: dict[int, ExactSolution] = {1: SmoothSolution(), 2: SingularSolution()}


def exact_solution(experiment: int, point) -> tuple[float, np.ndarray, np.ndarray]:
    """
    Value, gradient and Hessian entries ``(u11, u12, u22)`` at one point.

    Raises:
        ParameterError: For an experiment without a known solution.
        DegeneratePointError: On a kink line.
    """
    try:
        solution = EXACT_SOLUTIONS[experiment]
    except KeyError:
        raise ParameterError(f"experiment {experiment} has no exact solution") from None
    return solution(point)


# =============================================================================
# PROBLEM SPECS
# =============================================================================


@dataclass(frozen=True)
class ProblemSpec:
    """
    One benchmark problem with its mesh family.

    Attributes:
        experiment: 1, 2 or 3.
        coefficient: Coefficient field.
        f: Vectorized right-hand side.
        exact: Exact solution, None for experiment 3.
        mesh_family: ``quad`` or ``tri``.
        matching: Whether the initial mesh resolves the coefficient jumps.
    """

    experiment: int
    coefficient: CoefficientField
    f: Source
    exact: Optional[ExactSolution]
    mesh_family: str
    matching: bool = True

    def initial_mesh(self) -> Mesh:
        if self.mesh_family == "quad":
            if self.matching:
                return initial_quad_mesh(n=MATCHING_SIZE)
            return initial_quad_mesh(cross=NON_MATCHING_POINT)
        if self.matching:
            return initial_tri_mesh(n=MATCHING_SIZE)
        return initial_tri_mesh(cross=NON_MATCHING_POINT)

    def kink_cut(self, mesh: Mesh) -> np.ndarray:
        """Boolean mask of elements whose interior meets a kink of the exact solution."""
        if self.exact is None:
            return np.zeros(_n_elements(mesh), dtype=bool)
        samples = _boundary_samples(mesh)
        labels = self.exact.region(samples.reshape(-1, 2)).reshape(samples.shape[:2])
        return np.any(labels != labels[:, :1], axis=1)


def _n_elements(mesh: Mesh) -> int:
    return mesh.n_cells if isinstance(mesh, QuadMesh) else mesh.n_triangles


def _boundary_samples(mesh: Mesh) -> np.ndarray:
    """``(E, S, 2)`` points just inside element boundaries plus the centroid."""
    if isinstance(mesh, QuadMesh):
        lo, hi = mesh.lower, mesh.upper
        corners = np.stack(
            [lo, np.column_stack([hi[:, 0], lo[:, 1]]), hi, np.column_stack([lo[:, 0], hi[:, 1]])],
            axis=1,
        )
    else:
        corners = mesh.corners()
    s = np.linspace(0.0, 1.0, _EDGE_SAMPLES, endpoint=False)[None, :, None]
    n = corners.shape[1]
    parts = [
        corners[:, k, None, :] + s * (corners[:, (k + 1) % n, None, :] - corners[:, k, None, :])
        for k in range(n)
    ]
    centroid = corners.mean(axis=1)[:, None, :]
    boundary = np.concatenate(parts, axis=1)
    boundary = centroid + (1.0 - _SHRINK) * (boundary - centroid)
    return np.concatenate([boundary, centroid], axis=1)


def _manufactured(coefficient: CoefficientField, exact: ExactSolution) -> Source:
    def f(points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        a = coefficient.values(points)
        h = exact.hessian(points, strict=False)
        return a[:, 0] * h[:, 0] + 2.0 * a[:, 1] * h[:, 1] + a[:, 2] * h[:, 2]

    return f


def _unit_source(points: np.ndarray) -> np.ndarray:
    return np.ones(np.asarray(points).shape[0])


def problem_spec(experiment: int, mesh_family: str = "quad", matching: bool = True) -> ProblemSpec:
    """
    Build a benchmark problem.

    Args:
        experiment: 1 (smooth), 2 (singular) or 3 (curved coefficient jump).
        mesh_family: ``quad`` for BFS or ``tri`` for Taylor-Hood.
        matching: Use the axis-aligned initial mesh; ``False`` (experiment 1
            only) uses four rectangles meeting at (0.1, 0.2).

    Returns:
        ProblemSpec.

    Raises:
        ParameterError: For an unknown experiment or family, or a
            non-matching mesh with experiments 2 and 3.
    """
    if mesh_family not in ("quad", "tri"):
        raise ParameterError(f"unknown mesh family '{mesh_family}' (use quad or tri)")
    if experiment not in (1, 2, 3):
        raise ParameterError(f"unknown experiment {experiment} (use 1, 2 or 3)")
    if not matching and experiment != 1:
        raise ParameterError("a non-matching initial mesh is only available for experiment 1")

    if experiment == 3:
        coefficient = get_coefficient("experiment3_transformed")
        return ProblemSpec(3, coefficient, _unit_source, None, mesh_family, matching)
    coefficient = get_coefficient("experiment_sign")
    exact = EXACT_SOLUTIONS[experiment]
    return ProblemSpec(
        experiment, coefficient, _manufactured(coefficient, exact), exact, mesh_family, matching
    )


# =============================================================================
# ERRORS
# =============================================================================


@dataclass
class ErrorReport:
    """
    Errors and estimator of one level.

    Attributes:
        level: Refinement level.
        ndof: Reported number of degrees of freedom.
        h_max: Largest element diameter.
        err_h2: ``||D^2 u - D^2 u_h||`` (BFS) or ``||D^2 u - D w_h||`` (mixed).
        err_grad: ``||grad u - grad u_h||`` or ``||grad u - w_h||``.
        err_l2: ``||u - u_h||``.
        eta: Estimator total.
        efficiency: ``eta / err_h2``.
    """

    level: int
    ndof: int
    h_max: float
    err_h2: Optional[float] = None
    err_grad: Optional[float] = None
    err_l2: Optional[float] = None
    eta: Optional[float] = None
    efficiency: Optional[float] = None

    def as_dict(self) -> dict[str, Optional[float]]:
        return {
            "level": self.level,
            "ndof": self.ndof,
            "h_max": self.h_max,
            "err_h2": self.err_h2,
            "err_grad": self.err_grad,
            "err_l2": self.err_l2,
            "eta": self.eta,
            "efficiency": self.efficiency,
        }


def efficiency_index(report: ErrorReport) -> Optional[float]:
    """``eta / err_h2``, or None when either is absent or the error vanishes."""
    if report.eta is None or report.err_h2 is None or report.err_h2 <= 0.0:
        return None
    return report.eta / report.err_h2


def _squared_errors(solution, exact: ExactSolution, rule: QuadratureRule, cells: np.ndarray):
    if len(cells) == 0:
        return 0.0, 0.0, 0.0
    if isinstance(solution, DiscreteFunctionH2):
        points, weights, value, grad, hess = solution.fields_at(rule, cells)
        flat = points.reshape(-1, 2)
        d_u = exact.value(flat).reshape(value.shape) - value
        d_g = exact.gradient(flat).reshape(grad.shape) - grad
        d_h = exact.hessian(flat).reshape(hess.shape) - hess
        h2 = d_h[..., 0] ** 2 + 2.0 * d_h[..., 1] ** 2 + d_h[..., 2] ** 2
    else:
        fields = solution.fields_at(rule, cells)
        weights = fields.weights
        flat = fields.points.reshape(-1, 2)
        d_u = exact.value(flat).reshape(fields.u.shape) - fields.u
        d_g = exact.gradient(flat).reshape(fields.w.shape) - fields.w
        h = exact.hessian(flat).reshape(fields.u.shape + (3,))
        dw = fields.dw
        h2 = (
            (h[..., 0] - dw[..., 0, 0]) ** 2
            + (h[..., 1] - dw[..., 0, 1]) ** 2
            + (h[..., 1] - dw[..., 1, 0]) ** 2
            + (h[..., 2] - dw[..., 1, 1]) ** 2
        )
    return (
        float(np.sum(weights * h2)),
        float(np.sum(weights * np.sum(d_g**2, axis=-1))),
        float(np.sum(weights * d_u**2)),
    )


def compute_errors(
    solution: Union[DiscreteFunctionH2, MixedSolution],
    spec: ProblemSpec,
    rule: QuadratureRule,
    eta: Optional[float] = None,
    level: int = 0,
) -> ErrorReport:
    """
    Errors of a discrete solution against the exact solution.

    Elements cut by a kink of the exact solution are integrated with the
    rule repeated on ``4^2`` children.

    Args:
        solution: BFS or mixed solution.
        spec: Problem; without an exact solution only ``eta`` is filled in.
        rule: Element rule matching the mesh family.
        eta: Estimator total of the level.
        level: Level index.

    Returns:
        ErrorReport.
    """
    if isinstance(solution, DiscreteFunctionH2):
        mesh, ndof = solution.space.mesh, solution.space.ndof
    else:
        mesh, ndof = solution.spaces.mesh, solution.spaces.ndof
    report = ErrorReport(level=level, ndof=ndof, h_max=mesh.h_max(), eta=eta)
    if spec.exact is None:
        return report

    cut = spec.kink_cut(mesh)
    plain = _squared_errors(solution, spec.exact, rule, np.flatnonzero(~cut))
    fine = _squared_errors(
        solution, spec.exact, composite_rule(rule, KINK_SUBDIVISION), np.flatnonzero(cut)
    )
    report.err_h2 = math.sqrt(plain[0] + fine[0])
    report.err_grad = math.sqrt(plain[1] + fine[1])
    report.err_l2 = math.sqrt(plain[2] + fine[2])
    report.efficiency = efficiency_index(report)
    return report
