"""
Cordes Coefficients - Coefficient fields and the constants of the formulations.

This module holds the symmetric 2x2 coefficient matrices, the Cordes
quantities derived from them, and the explicit stability constants used
by the discretizations and the a posteriori estimators.

Example:
    >>> from cordes.coefficients import BUILTIN_COEFFICIENTS, Formulation, derived_constants
    >>> field = BUILTIN_COEFFICIENTS["experiment_sign"]
    >>> params = derived_constants(field, Formulation.LS, 1.0)
    >>> round(params.c_coercivity, 6)
    0.918861
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from cordes.errors import DomainError, ParameterError

logger = logging.getLogger(__name__)

# Relative slack for comparisons against analytically stored bounds
_BOUND_TOL = 1e-12


# =============================================================================
# SYMMETRIC MATRICES
# =============================================================================


@dataclass(frozen=True)
class SymMatrix2:
    """Symmetric 2x2 matrix stored by its three independent entries."""

    a11: float
    a12: float
    a22: float

    @classmethod
    def identity(cls) -> "SymMatrix2":
        return cls(1.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, values: Union[np.ndarray, list, tuple]) -> "SymMatrix2":
        """
        Build from a length-3 entry vector or a symmetric 2x2 array.

        Args:
            values: ``(a11, a12, a22)`` or a 2x2 array.

        Returns:
            SymMatrix2 instance.
        """
        arr = np.asarray(values, dtype=float)
        if arr.shape == (2, 2):
            if abs(arr[0, 1] - arr[1, 0]) > 1e-14 * max(1.0, float(np.abs(arr).max())):
                raise ParameterError("matrix is not symmetric")
            return cls(float(arr[0, 0]), float(arr[0, 1]), float(arr[1, 1]))
        if arr.shape == (3,):
            return cls(float(arr[0]), float(arr[1]), float(arr[2]))
        raise ParameterError(f"cannot build a symmetric 2x2 matrix from shape {arr.shape}")

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    @property
    def norm2(self) -> float:
        """Squared Frobenius norm, summed from the entries."""
        return self.a11**2 + 2.0 * self.a12**2 + self.a22**2

    @property
    def frobenius(self) -> float:
        return math.sqrt(self.norm2)

    def contract(self, other: Union["SymMatrix2", np.ndarray]) -> float:
        """Return the Frobenius product ``self : other``."""
        b = other.as_array() if isinstance(other, SymMatrix2) else np.asarray(other, dtype=float)
        return float(np.sum(self.as_array() * b))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def scaled(self, factor: float) -> "SymMatrix2":
        return SymMatrix2(factor * self.a11, factor * self.a12, factor * self.a22)


def eval_gamma(a: SymMatrix2) -> float:
    """
    Evaluate the scaling function ``gamma = tr A / |A|^2``.

    Args:
        a: Coefficient matrix.

    Returns:
        gamma(A).

    Raises:
        DomainError: If ``a`` is the zero matrix.
    """
    norm2 = a.norm2
    if norm2 == 0.0:
        raise DomainError("gamma is undefined for the zero matrix")
    return a.trace / norm2


def cordes_epsilon(a: SymMatrix2) -> float:
    """
    Largest epsilon for which ``a`` satisfies the two-dimensional Cordes condition.

    The condition ``|A|^2 / (tr A)^2 <= 1 / (1 + eps)`` rearranges to
    ``eps = (tr A)^2 / |A|^2 - 1``. The result is clamped to at most 1; the
    matrix satisfies the Cordes condition iff the result is positive.

    Raises:
        DomainError: If ``a`` is the zero matrix.
    """
    norm2 = a.norm2
    if norm2 == 0.0:
        raise DomainError("the Cordes condition is undefined for the zero matrix")
    return min(a.trace**2 / norm2 - 1.0, 1.0)


def entries_gamma(entries: np.ndarray) -> np.ndarray:
    """Vectorized gamma for an ``(N, 3)`` array of ``(a11, a12, a22)`` rows."""
    entries = np.asarray(entries, dtype=float)
    trace = entries[..., 0] + entries[..., 2]
    norm2 = entries[..., 0] ** 2 + 2.0 * entries[..., 1] ** 2 + entries[..., 2] ** 2
    if np.any(norm2 == 0.0):
        raise DomainError("gamma is undefined for the zero matrix")
    return trace / norm2


def entries_epsilon(entries: np.ndarray) -> np.ndarray:
    """Vectorized ``cordes_epsilon`` for an ``(N, 3)`` entry array."""
    entries = np.asarray(entries, dtype=float)
    trace = entries[..., 0] + entries[..., 2]
    norm2 = entries[..., 0] ** 2 + 2.0 * entries[..., 1] ** 2 + entries[..., 2] ** 2
    if np.any(norm2 == 0.0):
        raise DomainError("the Cordes condition is undefined for the zero matrix")
    return np.minimum(trace**2 / norm2 - 1.0, 1.0)


# =============================================================================
# COEFFICIENT FIELDS
# =============================================================================


EntryFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoefficientField:
    """
    Coefficient field ``A`` on the square together with its Cordes data.

    Attributes:
        name: Registry name.
        entries: Vectorized evaluator mapping ``(N, 2)`` points to ``(N, 3)``
            entry rows ``(a11, a12, a22)``.
        epsilon: Cordes parameter, in (0, 1].
        gamma_sup: Essential supremum of gamma.
        a_sup: Essential supremum of A (largest entry modulus).
        alpha1: Lower ellipticity bound.
        alpha2: Upper ellipticity bound.
        description: One-line description for listings.
    """

    name: str
    entries: EntryFunction
    epsilon: float
    gamma_sup: float
    a_sup: float
    alpha1: float
    alpha2: float
    description: str = ""

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ParameterError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.gamma_sup <= 0.0 or self.a_sup <= 0.0:
            raise ParameterError("gamma_sup and a_sup must be positive")
        if not 0.0 < self.alpha1 <= self.alpha2:
            raise ParameterError("ellipticity bounds must satisfy 0 < alpha1 <= alpha2")

    def values(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the entry rows at an ``(..., 2)`` point array."""
        points = np.asarray(points, dtype=float)
        flat = points.reshape(-1, 2)
        return self.entries(flat).reshape(points.shape[:-1] + (3,))

    def matrix(self, point) -> SymMatrix2:
        """Evaluate ``A`` at a single point."""
        return SymMatrix2.from_array(self.values(np.asarray(point, dtype=float)[None, :])[0])

    def gamma(self, points: np.ndarray) -> np.ndarray:
        return entries_gamma(self.values(points))

    def check(self, points: np.ndarray) -> bool:
        """
        Verify ellipticity, the Cordes bound and the gamma bound on sample points.

        Args:
            points: ``(N, 2)`` sample points in the square.

        Returns:
            True iff every sample respects the stored bounds.
        """
        vals = self.values(points)
        a11, a12, a22 = vals[:, 0], vals[:, 1], vals[:, 2]
        half_trace = 0.5 * (a11 + a22)
        radius = np.sqrt((0.5 * (a11 - a22)) ** 2 + a12**2)
        lo, hi = half_trace - radius, half_trace + radius
        tol = _BOUND_TOL * max(1.0, self.alpha2)
        ok_ellipticity = bool(np.all(lo >= self.alpha1 - tol) and np.all(hi <= self.alpha2 + tol))
        ok_cordes = bool(np.all(entries_epsilon(vals) >= self.epsilon - _BOUND_TOL))
        ok_gamma = bool(np.all(entries_gamma(vals) <= self.gamma_sup * (1.0 + _BOUND_TOL)))
        ok_sup = bool(np.all(np.abs(vals) <= self.a_sup * (1.0 + _BOUND_TOL)))
        if not (ok_ellipticity and ok_cordes and ok_gamma and ok_sup):
            logger.debug(
                "coefficient %s failed check: ellipticity=%s cordes=%s gamma=%s sup=%s",
                self.name,
                ok_ellipticity,
                ok_cordes,
                ok_gamma,
                ok_sup,
            )
        return ok_ellipticity and ok_cordes and ok_gamma and ok_sup


def _identity_entries(points: np.ndarray) -> np.ndarray:
    n = points.shape[0]
    out = np.zeros((n, 3))
    out[:, 0] = 1.0
    out[:, 2] = 1.0
    return out


def _sign_entries(points: np.ndarray) -> np.ndarray:
    # off-diagonal +1 on the axes themselves
    off = np.where(points[:, 0] * points[:, 1] < 0.0, -1.0, 1.0)
    out = np.empty((points.shape[0], 3))
    out[:, 0] = 2.0
    out[:, 1] = off
    out[:, 2] = 2.0
    return out


def transform_experiment3(points: np.ndarray) -> np.ndarray:
    """Nonlinear map ``phi(x) = (x1 + 1/3, x2 - 1/3 + cbrt(x1 + 1/3))``."""
    points = np.asarray(points, dtype=float)
    shifted = points[..., 0] + 1.0 / 3.0
    return np.stack([shifted, points[..., 1] - 1.0 / 3.0 + np.cbrt(shifted)], axis=-1)


def _transformed_sign_entries(points: np.ndarray) -> np.ndarray:
    return _sign_entries(transform_experiment3(points))


BUILTIN_COEFFICIENTS: dict[str, CoefficientField] = {
    "identity": CoefficientField(
        name="identity",
        entries=_identity_entries,
        epsilon=1.0,
        gamma_sup=1.0,
        a_sup=1.0,
        alpha1=1.0,
        alpha2=1.0,
        description="Identity matrix (Poisson / biharmonic case)",
    ),
    "experiment_sign": CoefficientField(
        name="experiment_sign",
        entries=_sign_entries,
        epsilon=0.6,
        gamma_sup=0.4,
        a_sup=2.0,
        alpha1=1.0,
        alpha2=3.0,
        description="Diagonal 2, off-diagonal sign(x1*x2)",
    ),
    "experiment3_transformed": CoefficientField(
        name="experiment3_transformed",
        entries=_transformed_sign_entries,
        epsilon=0.6,
        gamma_sup=0.4,
        a_sup=2.0,
        alpha1=1.0,
        alpha2=3.0,
        description="experiment_sign composed with a cube-root transform",
    ),
}


def get_coefficient(kind: str) -> CoefficientField:
    """
    Look up a built-in coefficient field.

    Raises:
        ParameterError: If ``kind`` is unknown.
    """
    try:
        return BUILTIN_COEFFICIENTS[kind.lower()]
    except KeyError:
        names = ", ".join(BUILTIN_COEFFICIENTS)
        raise ParameterError(f"unknown coefficient '{kind}' (available: {names})") from None


def builtin_coefficient(kind: str, point) -> SymMatrix2:
    """
    Evaluate a built-in coefficient at one point.

    Args:
        kind: ``experiment_sign``, ``experiment3_transformed`` or ``identity``.
        point: Point in the square.

    Returns:
        The coefficient matrix at ``point``.
    """
    return get_coefficient(kind).matrix(point)


# =============================================================================
# FORMULATIONS AND STABILIZATION CONSTANTS
# =============================================================================


class Formulation(Enum):
    """Test-function operator: ``gamma div`` (NS) or ``A : D`` (LS)."""

    NS = "ns"
    LS = "ls"

    @classmethod
    def parse(cls, value: Union[str, "Formulation"]) -> "Formulation":
        if isinstance(value, Formulation):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ParameterError(f"unknown formulation '{value}' (use ns or ls)") from None


@dataclass(frozen=True)
class StabilizationParams:
    """
    Explicit constants of one formulation for a given coefficient field.

    Attributes:
        formulation: NS or LS.
        lambda_: Stabilization weight lambda > 0.
        c_lambda: Coercivity constant of the enriched mixed form.
        sigma_lambda: Weight of the rotation term.
        mu: Young weight of the NS mixed estimator.
        c_coercivity: Coercivity constant ``c(gamma, eps)`` of the conforming form.
        epsilon: Cordes parameter of the field.
        gamma_sup: Supremum of gamma.
        a_sup: Supremum of A.
    """

    formulation: Formulation
    lambda_: float
    c_lambda: float
    sigma_lambda: float
    mu: float
    c_coercivity: float
    epsilon: float
    gamma_sup: float
    a_sup: float

    @property
    def residual_weight(self) -> float:
        """Weight of ``||A:Dw - f||^2`` in the mixed estimator."""
        if self.formulation is Formulation.NS:
            return 1.0 / (2.0 * self.mu)
        return 1.0

    @property
    def conforming_reliability(self) -> float:
        return self.c_coercivity

    @property
    def conforming_efficiency(self) -> float:
        return self.a_sup

    @property
    def mixed_reliability(self) -> float:
        if self.formulation is Formulation.NS:
            return math.sqrt(max(self.c_lambda**2 - 0.5 * self.mu * self.gamma_sup**2, 0.0))
        return self.c_lambda

    @property
    def mixed_efficiency(self) -> float:
        if self.formulation is Formulation.NS:
            return math.sqrt(self.a_sup**2 / (2.0 * self.mu) + self.sigma_lambda**2)
        return math.sqrt(self.a_sup**2 + self.sigma_lambda**2)

    def efficiency_interval(self, method: str) -> tuple[float, float]:
        """
        Predicted range of the efficiency index ``eta / error``.

        Args:
            method: ``bfs`` or ``taylor_hood``.

        Returns:
            ``(lower, upper)`` bounds.
        """
        if method == "bfs":
            return self.conforming_reliability, self.conforming_efficiency
        if method == "taylor_hood":
            return self.mixed_reliability, self.mixed_efficiency
        raise ParameterError(f"unknown method '{method}'")


def coercivity_constant(epsilon: float, gamma_sup: float) -> float:
    """Return ``c(gamma, eps) = (1 - sqrt(1 - eps)) / gamma_sup``."""
    return (1.0 - math.sqrt(1.0 - epsilon)) / gamma_sup


def derived_constants(
    field: CoefficientField,
    formulation: Union[Formulation, str],
    lambda_: float = 1.0,
    mu: Optional[float] = None,
) -> StabilizationParams:
    """
    Evaluate the stabilization constants of a formulation.

    Args:
        field: Coefficient field supplying epsilon, gamma_sup and a_sup.
        formulation: NS or LS.
        lambda_: Stabilization weight.
        mu: Young weight for the NS mixed estimator; defaults to the largest
            admissible value ``2 c_lambda^2 / gamma_sup^2``.

    Returns:
        StabilizationParams.

    Raises:
        ParameterError: If lambda is not positive, if NS is requested with
            ``|lambda - 1| >= sqrt(eps)``, or if ``mu`` is not admissible.
    """
    formulation = Formulation.parse(formulation)
    if not lambda_ > 0.0:
        raise ParameterError(f"lambda must be positive, got {lambda_}")

    eps, gsup = field.epsilon, field.gamma_sup
    c_conf = coercivity_constant(eps, gsup)

    if formulation is Formulation.NS:
        if abs(lambda_ - 1.0) >= math.sqrt(eps):
            raise ParameterError(
                f"NS formulation requires |lambda - 1| < sqrt(eps) = {math.sqrt(eps):.6g}, "
                f"got lambda = {lambda_}"
            )
        c_lambda = math.sqrt(1.0 - (lambda_**2 + 1.0 - eps) / (2.0 * lambda_))
        sigma = math.sqrt(max(1.0 - lambda_ / 2.0, 0.0))
    else:
        c_lambda = c_conf / math.sqrt(1.0 + lambda_)
        sigma = math.sqrt(
            c_lambda**2 + (1.0 + 1.0 / lambda_) * (1.0 - eps) / ((1.0 + lambda_) * gsup**2)
        )

    mu_max = 2.0 * c_lambda**2 / gsup**2
    if mu is None:
        mu = mu_max
    elif not 0.0 < mu <= mu_max * (1.0 + _BOUND_TOL):
        raise ParameterError(f"mu must lie in (0, {mu_max:.6g}], got {mu}")

    params = StabilizationParams(
        formulation=formulation,
        lambda_=lambda_,
        c_lambda=c_lambda,
        sigma_lambda=sigma,
        mu=mu,
        c_coercivity=c_conf,
        epsilon=eps,
        gamma_sup=gsup,
        a_sup=field.a_sup,
    )
    logger.debug("derived constants for %s/%s: %s", field.name, formulation.value, params)
    return params
