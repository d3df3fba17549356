"""
Tests for the adaptivity module.
"""

import numpy as np
import pytest

from cordes.adaptivity import AdaptiveConfig, EstimatorField, estimate, mark, run_adaptive
from cordes.bfs import (
    DiscreteFunctionH2,
    assemble_conforming,
    build_bfs_space,
    solve_conforming,
)
from cordes.coefficients import derived_constants
from cordes.errors import AdaptiveRunError, ParameterError, SolverError
from cordes.experiments import problem_spec
from cordes.mesh_quad import refine_quads
from cordes.mixed import build_th_spaces, solve_mixed
from cordes.quadrature import gauss_rectangle, gauss_triangle
from cordes.sparse import matvec, solve_direct


class TestEstimatorField:
    """Tests for estimator fields."""

    def test_total(self):
        """Test eta = sqrt of the sum."""
        field = EstimatorField([9.0, 16.0])
        assert field.total == 5.0
        assert len(field) == 2

    @pytest.mark.parametrize("values", [[1.0, -1e-3], [float("nan")], [float("inf"), 1.0]])
    def test_rejects_invalid(self, values):
        """Test that negative or non-finite values are rejected."""
        with pytest.raises(ParameterError):
            EstimatorField(values)


class TestMarking:
    """Tests for Doerfler and maximum marking."""

    @pytest.mark.parametrize(
        "theta,expected",
        [(0.3, [0]), (0.5, [0, 1]), (0.9, [0, 1, 2]), (1.0, [0, 1, 2, 3])],
    )
    def test_doerfler(self, theta, expected):
        """Test the minimal prefix on contributions 4, 3, 2, 1."""
        marked = mark(EstimatorField([4.0, 3.0, 2.0, 1.0]), AdaptiveConfig(theta=theta))
        assert marked.tolist() == expected

    def test_doerfler_unsorted_input(self):
        """Test that element order does not matter."""
        marked = mark(EstimatorField([1.0, 4.0, 2.0, 3.0]), AdaptiveConfig(theta=0.6))
        assert marked.tolist() == [1, 3]

    def test_doerfler_ties_by_id(self):
        """Test that ties go to the lower element id."""
        marked = mark(EstimatorField([1.0, 1.0, 1.0, 1.0]), AdaptiveConfig(theta=0.5))
        assert marked.tolist() == [0, 1]

    def test_doerfler_bulk_property(self):
        """Test the bulk criterion and minimality on random fields."""
        rng = np.random.default_rng(8)
        for theta in (0.1, 0.3, 0.7):
            eta2 = rng.exponential(size=50)
            marked = mark(EstimatorField(eta2), AdaptiveConfig(theta=theta))
            assert eta2[marked].sum() >= theta * eta2.sum() * (1.0 - 1e-12)
            smallest = np.sort(eta2[marked])[0]
            assert eta2[marked].sum() - smallest < theta * eta2.sum()

    def test_maximum(self):
        """Test that maximum marking selects every maximal element."""
        config = AdaptiveConfig(marking="maximum")
        assert mark(EstimatorField([1.0, 3.0, 3.0, 0.0]), config).tolist() == [1, 2]

    def test_zero_field(self):
        """Test that a vanishing field marks nothing."""
        assert len(mark(EstimatorField(np.zeros(5)), AdaptiveConfig())) == 0

    def test_empty_field(self):
        """Test that an empty field raises."""
        with pytest.raises(ParameterError):
            mark(EstimatorField(np.zeros(0)), AdaptiveConfig())


class TestAdaptiveConfig:
    """Tests for loop settings."""

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"theta": 0.0},
            {"theta": 1.5},
            {"marking": "random"},
            {"refinement": "red"},
            {"max_ndof": 0},
            {"max_levels": 0},
            {"subdivision": -1},
            {"formulation": "xx"},
        ],
    )
    def test_invalid(self, kwargs):
        """Test rejected settings."""
        with pytest.raises(ParameterError):
            AdaptiveConfig(**kwargs)

    def test_rules(self):
        """Test the element rule per method."""
        config = AdaptiveConfig(quad_order=3, tri_degree=4, subdivision=1)
        assert config.rule("bfs").size == 9 * 4
        assert config.rule("taylor_hood").kind == "triangle"


class TestEstimate:
    """Tests for estimator evaluation."""

    def test_zero_solution(self):
        """Test that eta of u_h = 0 is the norm of f."""
        problem = problem_spec(3)
        space = build_bfs_space(problem.initial_mesh())
        zero = DiscreteFunctionH2(space, np.zeros(space.ndof))
        stab = derived_constants(problem.coefficient, "ls", 1.0)
        field = estimate(zero, problem.coefficient, problem.f, stab, gauss_rectangle(5))
        np.testing.assert_allclose(field.contributions, 1.0)
        assert field.total == pytest.approx(2.0)

    def test_local_efficiency_identity(self):
        """Test eta(T)^2 = ||A:D^2 (u_h - u)||^2 on T for a manufactured source."""
        problem = problem_spec(1)
        space = build_bfs_space(problem.initial_mesh())
        u_h = solve_conforming(space, problem.coefficient, "ls", problem.f)
        stab = derived_constants(problem.coefficient, "ls", 1.0)
        rule = gauss_rectangle(5)
        field = estimate(u_h, problem.coefficient, problem.f, stab, rule)
        points, weights, _, _, hess = u_h.fields_at(rule)
        flat = points.reshape(-1, 2)
        diff = hess - problem.exact.hessian(flat).reshape(hess.shape)
        a = problem.coefficient.values(points)
        residual = (
            a[..., 0] * diff[..., 0] + 2 * a[..., 1] * diff[..., 1] + a[..., 2] * diff[..., 2]
        )
        expected = np.sum(weights * residual**2, axis=1)
        np.testing.assert_allclose(field.contributions, expected, rtol=1e-10)

    def test_mixed_zero_source(self):
        """Test that f = 0 gives a vanishing mixed estimator."""
        problem = problem_spec(1, "tri")
        spaces = build_th_spaces(problem.initial_mesh())
        stab = derived_constants(problem.coefficient, "ns", 1.0)
        zero = lambda p: np.zeros(len(p))  # noqa: E731
        solution = solve_mixed(spaces, problem.coefficient, "ns", stab, zero)
        field = estimate(solution, problem.coefficient, zero, stab, gauss_triangle(6))
        assert field.total == pytest.approx(0.0, abs=1e-12)


class TestRunAdaptive:
    """Tests for the adaptive loop."""

    def test_bfs_adaptive(self):
        """Test a short BFS run on experiment 1."""
        levels = []
        records = run_adaptive(
            problem_spec(1, "quad"),
            "bfs",
            AdaptiveConfig(max_ndof=300),
            on_level=lambda mesh, report: levels.append((mesh.n_cells, report.level)),
        )
        assert [r.level for r in records] == list(range(len(records)))
        assert [lv for _, lv in levels] == [r.level for r in records]
        assert records[-1].ndof > 300
        assert all(r.ndof <= 300 for r in records[:-1])
        assert all(b.ndof > a.ndof for a, b in zip(records, records[1:]))
        assert records[-1].err_h2 < records[0].err_h2
        assert all(r.eta > 0.0 and r.efficiency is not None for r in records)

    def test_taylor_hood_uniform(self):
        """Test a short uniform Taylor-Hood run."""
        records = run_adaptive(
            problem_spec(1, "tri"),
            "taylor_hood",
            AdaptiveConfig(refinement="uniform", max_ndof=2000),
        )
        assert len(records) >= 2
        h = [r.h_max for r in records]
        np.testing.assert_allclose(np.array(h[1:]) / np.array(h[:-1]), 0.5)
        assert records[-1].err_h2 < records[0].err_h2

    def test_experiment3_reports_estimator_only(self):
        """Test that experiment 3 leaves error columns empty."""
        records = run_adaptive(problem_spec(3, "quad"), "bfs", AdaptiveConfig(max_ndof=100))
        assert all(r.err_h2 is None and r.efficiency is None for r in records)
        assert all(r.eta > 0.0 for r in records)

    def test_max_levels(self):
        """Test the hard level cap."""
        records = run_adaptive(
            problem_spec(1, "quad"), "bfs", AdaptiveConfig(max_ndof=10**6, max_levels=2)
        )
        assert len(records) == 2

    def test_check_meshes(self):
        """Test a run with mesh scans enabled."""
        records = run_adaptive(
            problem_spec(1, "tri"),
            "taylor_hood",
            AdaptiveConfig(max_ndof=200, check_meshes=True, formulation="ns"),
        )
        assert records

    def test_method_family_mismatch(self):
        """Test that BFS on triangles is rejected."""
        with pytest.raises(ParameterError):
            run_adaptive(problem_spec(1, "tri"), "bfs")
        with pytest.raises(ParameterError):
            run_adaptive(problem_spec(1, "quad"), "lagrange")

    def test_solver_failure_keeps_records(self, monkeypatch):
        """Test that a failing solve reports the levels solved so far."""
        import cordes.adaptivity as adaptivity

        original = adaptivity.solve_conforming
        calls = []

        def failing(*args, **kwargs):
            calls.append(1)
            if len(calls) > 1:
                raise SolverError("singular", condition=1e20)
            return original(*args, **kwargs)

        monkeypatch.setattr(adaptivity, "solve_conforming", failing)
        with pytest.raises(AdaptiveRunError) as info:
            run_adaptive(problem_spec(1, "quad"), "bfs", AdaptiveConfig(max_ndof=10**5))
        assert len(info.value.records) == 1
        assert info.value.condition == 1e20


class TestAdaptiveLevels:
    """Tests that follow a BFS least-squares run level by level."""

    N_LEVELS = 5

    @pytest.fixture(scope="class")
    def levels(self):
        problem = problem_spec(1, "quad")
        stab = derived_constants(problem.coefficient, "ls", 1.0)
        config = AdaptiveConfig(theta=0.3)
        rule = gauss_rectangle(5)
        mesh = problem.initial_mesh()
        levels = []
        for _ in range(self.N_LEVELS):
            space = build_bfs_space(mesh)
            matrix, rhs = assemble_conforming(space, problem.coefficient, "ls", problem.f, rule)
            u_h = DiscreteFunctionH2(space, solve_direct(matrix, rhs, check=True))
            field = estimate(u_h, problem.coefficient, problem.f, stab, rule)
            marked = mark(field, config)
            refined = refine_quads(mesh, marked)
            levels.append((mesh, matrix, rhs, u_h, field, marked, refined))
            mesh = refined
        return levels

    def test_galerkin_orthogonality(self, levels):
        """Test that the residual is orthogonal to the discrete space on every level."""
        for _, matrix, rhs, u_h, _, _, _ in levels:
            x = u_h.coefficients
            defect = np.abs(matvec(matrix, x) - rhs).max()
            assert defect <= 1e-8 * (matrix.norm_inf() * np.abs(x).max() + np.abs(rhs).max())

    def test_residual_is_monotone(self, levels):
        """Test that the least-squares residual never grows on nested meshes."""
        totals = [field.total for *_, field, _, _ in levels]
        for coarse, fine in zip(totals, totals[1:]):
            assert fine <= coarse * (1.0 + 1e-6)
        assert totals[-1] < totals[0]

    def test_marked_cells_are_refined(self, levels):
        """Test that every marked cell is split into children."""
        for mesh, *_, marked, refined in levels:
            assert len(marked) > 0
            marked_keys = {mesh.keys[c] for c in marked}
            assert marked_keys.isdisjoint(refined.keys)
            areas = mesh.areas()
            centers = 0.5 * (mesh.lower[marked] + mesh.upper[marked])
            children = refined.locate(centers)
            assert np.all(refined.areas()[children] <= 0.25 * areas[marked] * (1.0 + 1e-12))
            assert refined.areas().sum() == pytest.approx(4.0)
