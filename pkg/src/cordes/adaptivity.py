"""
Cordes Adaptivity - Error estimation, marking and the adaptive loop.

Each level runs Solve, Estimate, Mark and Refine. The estimator is the
element residual ``||A:D^2 u_h - f||`` for BFS and
``w ||A:D w_h - f||^2 + sigma^2 ||rot w_h||^2`` for Taylor-Hood, with the
weight ``w = 1 / (2 mu)`` (NS) or ``1`` (LS).

Example:
    >>> from cordes.experiments import problem_spec
    >>> records = run_adaptive(problem_spec(1, "quad"), "bfs", AdaptiveConfig(max_ndof=500))
    >>> [r.level for r in records][:2]
    [0, 1]
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from cordes.bfs import DiscreteFunctionH2, build_bfs_space, solve_conforming
from cordes.coefficients import (
    CoefficientField,
    Formulation,
    StabilizationParams,
    derived_constants,
)
from cordes.errors import AdaptiveRunError, MeshError, ParameterError, SolverError
from cordes.experiments import ErrorReport, ProblemSpec, compute_errors
from cordes.mesh_quad import QuadMesh, check_one_hanging_node, is_refinement_of, refine_quads
from cordes.mesh_tri import TriMesh, check_conforming, nvb_refine, refine_uniform
from cordes.mixed import MixedSolution, build_th_spaces, solve_mixed
from cordes.quadrature import (
    DEFAULT_RECTANGLE_POINTS,
    DEFAULT_TRIANGLE_DEGREE,
    QuadratureRule,
    composite_rule,
    gauss_rectangle,
    gauss_triangle,
)

logger = logging.getLogger(__name__)

Source = Callable[[np.ndarray], np.ndarray]
Solution = Union[DiscreteFunctionH2, MixedSolution]
Mesh = Union[QuadMesh, TriMesh]

# One CSV row per solved level
ConvergenceRecord = ErrorReport

METHODS = ("bfs", "taylor_hood")
MARKINGS = ("doerfler", "maximum")
REFINEMENTS = ("uniform", "adaptive")

# Relative slack on the Doerfler sum against rounding in the cumulative sum
_DOERFLER_RTOL = 1e-12

_MESH_FAMILY = {"bfs": "quad", "taylor_hood": "tri"}


# =============================================================================
# ESTIMATOR
# =============================================================================


@dataclass
class EstimatorField:
    """
    Squared element contributions of the estimator.

    Attributes:
        contributions: ``(E,)`` non-negative values ``eta(T)^2``.
    """

    contributions: np.ndarray

    def __post_init__(self):
        self.contributions = np.asarray(self.contributions, dtype=float)
        if np.any(self.contributions < 0.0) or not np.all(np.isfinite(self.contributions)):
            raise ParameterError("estimator contributions must be finite and non-negative")

    def __len__(self) -> int:
        return len(self.contributions)

    @property
    def total(self) -> float:
        """``eta = sqrt(sum eta(T)^2)``."""
        return math.sqrt(float(np.sum(self.contributions)))


def estimate(
    solution: Solution,
    coeff: CoefficientField,
    f: Source,
    stab: StabilizationParams,
    rule: QuadratureRule,
) -> EstimatorField:
    """
    Evaluate the element contributions of the residual estimator.

    Args:
        solution: BFS or mixed solution on the current mesh.
        coeff: Coefficient field.
        f: Vectorized right-hand side.
        stab: Constants supplying the mixed weights.
        rule: Element rule.

    Returns:
        EstimatorField.
    """
    if isinstance(solution, DiscreteFunctionH2):
        points, weights, _, _, hess = solution.fields_at(rule)
        a = coeff.values(points)
        residual = (
            a[..., 0] * hess[..., 0] + 2.0 * a[..., 1] * hess[..., 1] + a[..., 2] * hess[..., 2]
        )
        residual -= f(points.reshape(-1, 2)).reshape(weights.shape)
        return EstimatorField(np.sum(weights * residual**2, axis=1))

    fields = solution.fields_at(rule)
    weights = fields.weights
    residual = fields.contract(coeff.values(fields.points))
    residual -= f(fields.points.reshape(-1, 2)).reshape(weights.shape)
    contributions = stab.residual_weight * np.sum(weights * residual**2, axis=1)
    contributions += stab.sigma_lambda**2 * np.sum(weights * fields.rot_w() ** 2, axis=1)
    return EstimatorField(contributions)


# =============================================================================
# MARKING
# =============================================================================


@dataclass
class AdaptiveConfig:
    """
    Settings of the adaptive loop.

    Attributes:
        theta: Doerfler bulk parameter in (0, 1].
        marking: ``doerfler`` or ``maximum``.
        refinement: ``adaptive`` or ``uniform``.
        max_ndof: Stop after the first level with more degrees of freedom.
        formulation: ``ls`` or ``ns``.
        lambda_: Stabilization weight.
        mu: NS estimator weight; the largest admissible value when None.
        quad_order: Gauss points per direction on rectangles.
        tri_degree: Exactness degree of the triangle rule.
        subdivision: Composite rule level for assembly and estimation.
        max_levels: Hard cap on the number of levels.
        check_meshes: Scan mesh invariants after every refinement.
    """

    theta: float = 0.3
    marking: str = "doerfler"
    refinement: str = "adaptive"
    max_ndof: int = 20000
    formulation: Union[Formulation, str] = Formulation.LS
    lambda_: float = 1.0
    mu: Optional[float] = None
    quad_order: int = DEFAULT_RECTANGLE_POINTS
    tri_degree: int = DEFAULT_TRIANGLE_DEGREE
    subdivision: int = 0
    max_levels: int = 40
    check_meshes: bool = False

    def __post_init__(self):
        self.formulation = Formulation.parse(self.formulation)
        if not 0.0 < self.theta <= 1.0:
            raise ParameterError(f"theta must lie in (0, 1], got {self.theta}")
        if self.marking not in MARKINGS:
            raise ParameterError(f"unknown marking '{self.marking}' (use doerfler or maximum)")
        if self.refinement not in REFINEMENTS:
            raise ParameterError(
                f"unknown refinement '{self.refinement}' (use uniform or adaptive)"
            )
        if self.max_ndof < 1:
            raise ParameterError("max_ndof must be positive")
        if self.max_levels < 1:
            raise ParameterError("max_levels must be positive")
        if self.subdivision < 0:
            raise ParameterError("subdivision must be non-negative")

    def rule(self, method: str) -> QuadratureRule:
        """Element rule of ``method`` with the configured subdivision."""
        if method == "bfs":
            base = gauss_rectangle(self.quad_order)
        else:
            base = gauss_triangle(self.tri_degree, symmetric=False)
        return composite_rule(base, self.subdivision)


def mark(estimator: EstimatorField, config: AdaptiveConfig) -> np.ndarray:
    """
    Select elements for refinement.

    Doerfler marking sorts the contributions in descending order (ties by
    ascending element id) and returns the shortest prefix whose sum reaches
    ``theta`` times the total. Maximum marking returns every element with
    the largest contribution.

    Args:
        estimator: Element contributions.
        config: Supplies ``marking`` and ``theta``.

    Returns:
        Sorted array of element ids; empty when all contributions vanish.

    Raises:
        ParameterError: For an empty field.
    """
    eta2 = estimator.contributions
    if len(eta2) == 0:
        raise ParameterError("cannot mark on an empty estimator field")
    total = float(np.sum(eta2))
    if total == 0.0:
        return np.array([], dtype=np.int64)

    if config.marking == "maximum":
        return np.flatnonzero(eta2 == eta2.max())

    order = np.lexsort((np.arange(len(eta2)), -eta2))
    cumulative = np.cumsum(eta2[order])
    target = config.theta * total * (1.0 - _DOERFLER_RTOL)
    count = int(np.searchsorted(cumulative, target, side="left")) + 1
    return np.sort(order[: min(count, len(eta2))])


# =============================================================================
# ADAPTIVE LOOP
# =============================================================================


def _solve(problem: ProblemSpec, method: str, mesh: Mesh, stab, config, rule) -> Solution:
    if method == "bfs":
        space = build_bfs_space(mesh)
        return solve_conforming(space, problem.coefficient, config.formulation, problem.f, rule)
    spaces = build_th_spaces(mesh)
    return solve_mixed(spaces, problem.coefficient, config.formulation, stab, problem.f, rule)


def _refine(mesh: Mesh, estimator: EstimatorField, config: AdaptiveConfig) -> Mesh:
    if isinstance(mesh, QuadMesh):
        if config.refinement == "uniform":
            return refine_quads(mesh, range(mesh.n_cells))
        return refine_quads(mesh, mark(estimator, config))
    if config.refinement == "uniform":
        return refine_uniform(mesh)
    return nvb_refine(mesh, mark(estimator, config))


def _scan(mesh: Mesh, previous: Mesh) -> None:
    if isinstance(mesh, QuadMesh):
        if not check_one_hanging_node(mesh):
            raise MeshError("refined mesh violates the one-hanging-node rule")
        if not is_refinement_of(mesh, previous):
            raise MeshError("refined mesh is not nested in its parent")
    elif not check_conforming(mesh):
        raise MeshError("refined triangulation is not conforming")


def run_adaptive(
    problem: ProblemSpec,
    method: str,
    config: Optional[AdaptiveConfig] = None,
    on_level: Optional[Callable[[Mesh, ErrorReport], None]] = None,
) -> list[ErrorReport]:
    """
    Run the adaptive (or uniform) refinement loop.

    The loop stops after the first level with ``ndof > max_ndof``, when the
    estimator vanishes, or after ``max_levels`` levels.

    Args:
        problem: Benchmark problem; its mesh family must match ``method``.
        method: ``bfs`` or ``taylor_hood``.
        config: Loop settings, defaults when omitted.
        on_level: Called with the mesh and record of every solved level.

    Returns:
        One record per level.

    Raises:
        ParameterError: For an unknown method or a family mismatch.
        AdaptiveRunError: On a solver failure or a mesh invariant violation;
            ``records`` holds the levels solved so far.
    """
    if method not in METHODS:
        raise ParameterError(f"unknown method '{method}' (use bfs or taylor_hood)")
    if problem.mesh_family != _MESH_FAMILY[method]:
        raise ParameterError(f"method {method} needs a {_MESH_FAMILY[method]} mesh")
    config = config or AdaptiveConfig()
    stab = derived_constants(problem.coefficient, config.formulation, config.lambda_, config.mu)
    rule = config.rule(method)

    mesh = problem.initial_mesh()
    records: list[ErrorReport] = []
    for level in range(config.max_levels):
        try:
            solution = _solve(problem, method, mesh, stab, config, rule)
        except SolverError as exc:
            raise AdaptiveRunError(
                f"solve failed on level {level}: {exc}", records, exc.condition
            ) from exc

        estimator = estimate(solution, problem.coefficient, problem.f, stab, rule)
        report = compute_errors(solution, problem, rule, eta=estimator.total, level=level)
        records.append(report)
        logger.info(
            "level %d: ndof=%d h_max=%.4g eta=%.6g err_h2=%s",
            level,
            report.ndof,
            report.h_max,
            report.eta,
            "-" if report.err_h2 is None else f"{report.err_h2:.6g}",
        )
        if on_level is not None:
            on_level(mesh, report)

        if report.ndof > config.max_ndof or estimator.total == 0.0:
            break
        refined = _refine(mesh, estimator, config)
        if config.check_meshes:
            try:
                _scan(refined, mesh)
            except MeshError as exc:
                raise AdaptiveRunError(f"level {level + 1}: {exc}", records) from exc
        mesh = refined
    return records
