"""
Tests for the coefficients module.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cordes.coefficients import (
    BUILTIN_COEFFICIENTS,
    Formulation,
    SymMatrix2,
    builtin_coefficient,
    coercivity_constant,
    cordes_epsilon,
    derived_constants,
    entries_epsilon,
    eval_gamma,
    get_coefficient,
    transform_experiment3,
)
from cordes.errors import DomainError, ParameterError


@pytest.fixture
def sign_field():
    """The sign coefficient of experiments 1 and 2."""
    return get_coefficient("experiment_sign")


class TestSymMatrix2:
    """Tests for symmetric 2x2 matrices."""

    def test_trace_and_norm(self):
        """Test trace and Frobenius norm."""
        a = SymMatrix2(2.0, 1.0, 2.0)
        assert a.trace == 4.0
        assert a.frobenius == pytest.approx(math.sqrt(10.0))

    def test_from_array_shapes(self):
        """Test construction from entry vectors and 2x2 arrays."""
        assert SymMatrix2.from_array([1.0, 0.5, 3.0]) == SymMatrix2(1.0, 0.5, 3.0)
        matrix = np.array([[1.0, 0.5], [0.5, 3.0]])
        assert SymMatrix2.from_array(matrix) == SymMatrix2(1.0, 0.5, 3.0)

    def test_from_array_rejects_nonsymmetric(self):
        """Test that a nonsymmetric array is rejected."""
        with pytest.raises(ParameterError):
            SymMatrix2.from_array(np.array([[1.0, 0.5], [0.0, 3.0]]))

    def test_from_array_rejects_bad_shape(self):
        """Test that a wrong shape is rejected."""
        with pytest.raises(ParameterError):
            SymMatrix2.from_array([1.0, 2.0])

    def test_contract_counts_off_diagonal_twice(self):
        """Test the Frobenius product."""
        a = SymMatrix2(1.0, 2.0, 3.0)
        assert a.contract(SymMatrix2.identity()) == 4.0
        assert a.contract(a) == pytest.approx(a.frobenius**2)


class TestCordesQuantities:
    """Tests for gamma and the Cordes parameter."""

    def test_identity(self):
        """Test the identity matrix."""
        assert eval_gamma(SymMatrix2.identity()) == 1.0
        assert cordes_epsilon(SymMatrix2.identity()) == 1.0

    @pytest.mark.parametrize("factor", [0.5, 2.0, 4.0])
    def test_scaled_identity_is_exact(self, factor):
        """Test that multiples of the identity give epsilon 1 without rounding."""
        a = SymMatrix2.identity().scaled(factor)
        assert a.norm2 == 2.0 * factor**2
        assert cordes_epsilon(a) == 1.0
        assert eval_gamma(a) == 1.0 / factor

    def test_sign_matrix(self):
        """Test [[2, 1], [1, 2]]."""
        a = SymMatrix2(2.0, 1.0, 2.0)
        assert eval_gamma(a) == pytest.approx(0.4)
        assert cordes_epsilon(a) == pytest.approx(0.6)

    def test_scaling_invariance(self):
        """Test that epsilon is invariant under positive scaling."""
        a = SymMatrix2(3.0, -0.7, 1.2)
        assert cordes_epsilon(a.scaled(5.0)) == pytest.approx(cordes_epsilon(a))
        assert eval_gamma(a.scaled(5.0)) == pytest.approx(eval_gamma(a) / 5.0)

    def test_zero_matrix(self):
        """Test that the zero matrix raises a domain error."""
        zero = SymMatrix2(0.0, 0.0, 0.0)
        with pytest.raises(DomainError):
            eval_gamma(zero)
        with pytest.raises(DomainError):
            cordes_epsilon(zero)

    def test_vectorized_matches_scalar(self):
        """Test the vectorized epsilon against the scalar one."""
        rng = np.random.default_rng(7)
        entries = rng.uniform(0.5, 2.0, size=(20, 3))
        expected = [cordes_epsilon(SymMatrix2.from_array(row)) for row in entries]
        np.testing.assert_allclose(entries_epsilon(entries), expected)

    @settings(max_examples=300, deadline=None)
    @given(
        st.floats(0.1, 10.0),
        st.floats(0.1, 10.0),
        st.floats(-0.99, 0.99),
        st.lists(st.floats(-10.0, 10.0), min_size=3, max_size=3),
    )
    def test_gamma_scaled_operator_bound(self, l1, l2, rho, b_entries):
        """Test |gamma A:B - tr B| <= sqrt(1 - eps) |B| for positive definite A."""
        a = SymMatrix2(l1, rho * math.sqrt(l1 * l2), l2)
        b = SymMatrix2.from_array(b_entries)
        eps = cordes_epsilon(a)
        lhs = abs(eval_gamma(a) * a.contract(b) - b.trace)
        assert lhs <= math.sqrt(max(1.0 - eps, 0.0)) * b.frobenius + 1e-12 * (1.0 + b.frobenius)


def sample_cordes_pairs(n, seed):
    """Rejection-sample ``n`` Cordes matrices with random partners."""
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < n:
        a = SymMatrix2.from_array(rng.uniform(-5.0, 5.0, size=3))
        if a.norm2 > 0.0 and cordes_epsilon(a) > 0.0:
            pairs.append((a, SymMatrix2.from_array(rng.standard_normal(3))))
    return pairs


class TestCordesSamples:
    """Bounds checked on rejection-sampled Cordes matrices."""

    N_SAMPLES = 10_000

    @pytest.fixture(scope="class")
    def pairs(self):
        return sample_cordes_pairs(self.N_SAMPLES, seed=2024)

    def test_gamma_scaled_operator_bound(self, pairs):
        """Test |gamma A:B - tr B| <= sqrt(1 - eps) |B| on every sample."""
        violations = 0
        for a, b in pairs:
            lhs = abs(eval_gamma(a) * a.contract(b) - b.trace)
            if lhs > math.sqrt(1.0 - cordes_epsilon(a)) * b.frobenius + 1e-12:
                violations += 1
        assert violations == 0

    def test_frobenius_distance_to_identity(self, pairs):
        """Test |gamma A - I| <= sqrt(1 - eps), with equality in two dimensions."""
        for a, _ in pairs:
            distance = SymMatrix2.from_array(eval_gamma(a) * a.as_array() - np.eye(2)).frobenius
            bound = math.sqrt(1.0 - cordes_epsilon(a))
            assert distance <= bound + 1e-10
            assert distance == pytest.approx(bound, rel=1e-7, abs=1e-9)


class TestCoefficientFields:
    """Tests for built-in coefficient fields."""

    def test_builtin_names(self):
        """Test the registry contents."""
        expected = {"identity", "experiment_sign", "experiment3_transformed"}
        assert set(BUILTIN_COEFFICIENTS) == expected

    def test_unknown_coefficient(self):
        """Test that an unknown name raises."""
        with pytest.raises(ParameterError):
            get_coefficient("nonexistent")

    def test_sign_values(self, sign_field):
        """Test the off-diagonal sign in each quadrant."""
        points = np.array([[0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]])
        values = sign_field.values(points)
        np.testing.assert_array_equal(values[:, 0], 2.0)
        np.testing.assert_array_equal(values[:, 1], [1.0, -1.0, 1.0, -1.0])

    def test_builtin_coefficient_point(self):
        """Test single-point evaluation."""
        assert builtin_coefficient("experiment_sign", (0.5, 0.5)) == SymMatrix2(2.0, 1.0, 2.0)
        assert builtin_coefficient("identity", (0.1, -0.3)) == SymMatrix2.identity()

    def test_values_keep_leading_shape(self, sign_field):
        """Test that values accepts (E, Q, 2) arrays."""
        points = np.full((4, 5, 2), 0.25)
        assert sign_field.values(points).shape == (4, 5, 3)

    @pytest.mark.parametrize("name", sorted(BUILTIN_COEFFICIENTS))
    def test_check_passes_on_grid(self, name):
        """Test that the stored bounds hold on a sample grid."""
        grid = np.linspace(-1.0, 1.0, 33)
        gx, gy = np.meshgrid(grid, grid)
        points = np.column_stack([gx.ravel(), gy.ravel()])
        assert get_coefficient(name).check(points)

    def test_transform(self):
        """Test the experiment 3 transform at a known point."""
        mapped = transform_experiment3(np.array([[-1.0 / 3.0, 0.0]]))
        np.testing.assert_allclose(mapped, [[0.0, -1.0 / 3.0]], atol=1e-15)


class TestDerivedConstants:
    """Tests for the stabilization constants."""

    def test_coercivity_constant(self, sign_field):
        """Test c = 5/2 - sqrt(5/2) for the sign coefficient."""
        params = derived_constants(sign_field, Formulation.LS, 1.0)
        assert params.c_coercivity == pytest.approx(2.5 - math.sqrt(2.5), abs=1e-12)
        assert params.c_coercivity == pytest.approx(0.918861, abs=1e-6)
        assert coercivity_constant(0.6, 0.4) == pytest.approx(params.c_coercivity)

    def test_ls_constants(self, sign_field):
        """Test the LS constants at lambda = 1."""
        params = derived_constants(sign_field, "ls", 1.0)
        assert params.c_lambda == pytest.approx(0.649733, abs=1e-6)
        assert params.sigma_lambda == pytest.approx(1.709430, abs=1e-6)
        assert params.residual_weight == 1.0

    def test_ns_constants(self, sign_field):
        """Test the NS constants at lambda = 1."""
        params = derived_constants(sign_field, "ns", 1.0)
        assert params.c_lambda == pytest.approx(math.sqrt(0.3))
        assert params.sigma_lambda == pytest.approx(math.sqrt(0.5))
        assert params.mu == pytest.approx(3.75)
        assert params.residual_weight == pytest.approx(1.0 / 7.5)

    def test_identity_constants(self):
        """Test the identity coefficient."""
        params = derived_constants(get_coefficient("identity"), "ls", 1.0)
        assert params.c_coercivity == pytest.approx(1.0)
        assert params.c_lambda == pytest.approx(1.0 / math.sqrt(2.0))
        assert params.sigma_lambda == pytest.approx(1.0 / math.sqrt(2.0))

    def test_ns_lambda_out_of_range(self, sign_field):
        """Test that NS rejects |lambda - 1| >= sqrt(eps)."""
        with pytest.raises(ParameterError):
            derived_constants(sign_field, "ns", 1.8)
        derived_constants(sign_field, "ns", 1.7)

    def test_nonpositive_lambda(self, sign_field):
        """Test that lambda must be positive."""
        with pytest.raises(ParameterError):
            derived_constants(sign_field, "ls", 0.0)

    def test_mu_bounds(self, sign_field):
        """Test user-supplied mu values."""
        params = derived_constants(sign_field, "ns", 1.0, mu=1.0)
        assert params.mu == 1.0
        assert params.mixed_reliability > 0.0
        with pytest.raises(ParameterError):
            derived_constants(sign_field, "ns", 1.0, mu=4.0)
        with pytest.raises(ParameterError):
            derived_constants(sign_field, "ns", 1.0, mu=-1.0)

    def test_efficiency_intervals(self, sign_field):
        """Test the predicted efficiency intervals."""
        params = derived_constants(sign_field, "ls", 1.0)
        lo, hi = params.efficiency_interval("bfs")
        assert lo == pytest.approx(0.918861, abs=1e-6)
        assert hi == 2.0
        lo, hi = params.efficiency_interval("taylor_hood")
        assert lo == pytest.approx(0.649733, abs=1e-6)
        assert hi == pytest.approx(math.sqrt(4.0 + params.sigma_lambda**2))
        with pytest.raises(ParameterError):
            params.efficiency_interval("other")

    def test_formulation_parse(self):
        """Test formulation parsing."""
        assert Formulation.parse("NS") is Formulation.NS
        assert Formulation.parse(Formulation.LS) is Formulation.LS
        with pytest.raises(ParameterError):
            Formulation.parse("xx")
