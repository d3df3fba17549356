"""
Cordes Errors - Exception hierarchy shared by the library and the CLI.

Every error raised on purpose by the package derives from ``CordesError``
so callers can catch the whole family at once. Parameter and domain
errors also derive from ``ValueError``; solver errors derive from
``RuntimeError``.
"""

from typing import Any, Optional


class CordesError(Exception):
    """Base class for all package errors."""


class ParameterError(CordesError, ValueError):
    """Invalid parameter or parameter combination."""


class DomainError(CordesError, ValueError):
    """Evaluation outside the domain of a function."""


class DegeneratePointError(DomainError):
    """Derivative requested on a line where the function is not differentiable."""


class MeshError(CordesError, RuntimeError):
    """A refined mesh violates the hanging-node rule or conformity."""


class SolverError(CordesError, RuntimeError):
    """
    Linear solve failed or was not accurate enough.

    Attributes:
        condition: Rough condition estimate of the failed system, if known.
    """

    def __init__(self, message: str, condition: Optional[float] = None):
        super().__init__(message)
        self.condition = condition


class AdaptiveRunError(SolverError):
    """
    Solver failure (or mesh invariant violation) inside the adaptive loop.

    Attributes:
        records: Convergence records of the levels solved before the failure.
    """

    def __init__(self, message: str, records: list[Any], condition: Optional[float] = None):
        super().__init__(message, condition=condition)
        self.records = records
