"""
Cordes - Adaptive finite elements for nondivergence-form equations

A CLI tool and Python library that solves ``A : D^2 u = f`` on the square
with coefficients satisfying the Cordes condition, using conforming
Bogner-Fox-Schmit rectangles or stabilized Taylor-Hood triangles, and
refines the mesh adaptively from a residual estimator.

Example:
    >>> from cordes import AdaptiveConfig, problem_spec, run_adaptive
    >>> problem = problem_spec(1, "quad")
    >>> records = run_adaptive(problem, "bfs", AdaptiveConfig(max_ndof=2000))
    >>> records[-1].efficiency

CLI Usage:
    $ cordes run --experiment 1 --method bfs-ls -o exp1.csv
    $ cordes constants --formulation ns
"""

__version__ = "0.1.0"
__author__ = "Cordes Contributors"

from cordes.adaptivity import AdaptiveConfig, EstimatorField, estimate, mark, run_adaptive
from cordes.coefficients import (
    BUILTIN_COEFFICIENTS,
    CoefficientField,
    Formulation,
    StabilizationParams,
    SymMatrix2,
    derived_constants,
    get_coefficient,
)
from cordes.errors import (
    AdaptiveRunError,
    CordesError,
    DegeneratePointError,
    DomainError,
    MeshError,
    ParameterError,
    SolverError,
)
from cordes.experiments import ErrorReport, ProblemSpec, compute_errors, problem_spec

__all__ = [
    # Version
    "__version__",
    # Coefficients and constants
    "BUILTIN_COEFFICIENTS",
    "CoefficientField",
    "Formulation",
    "StabilizationParams",
    "SymMatrix2",
    "derived_constants",
    "get_coefficient",
    # Benchmarks and the adaptive loop
    "ProblemSpec",
    "ErrorReport",
    "problem_spec",
    "compute_errors",
    "AdaptiveConfig",
    "EstimatorField",
    "estimate",
    "mark",
    "run_adaptive",
    # Errors
    "CordesError",
    "ParameterError",
    "DomainError",
    "DegeneratePointError",
    "MeshError",
    "SolverError",
    "AdaptiveRunError",
]
