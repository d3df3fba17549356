"""
Cordes Sparse - Triplet assembly and direct sparse solves.

Assembly accumulates ``(row, col, value)`` triplets; ``compress`` sums
duplicates into a compressed-row matrix. ``solve_direct`` equilibrates rows
and columns, then factorizes with SuperLU (partial pivoting, COLAMD
ordering), which copes with the zero diagonal blocks of saddle-point
systems.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from cordes.errors import SolverError

logger = logging.getLogger(__name__)

# Backward error tolerance of solve_direct
BACKWARD_TOL = 1e-8

# Pivot ratio below which a factorization is considered numerically singular
PIVOT_RATIO_TOL = 1e-14


@dataclass
class TripletList:
    """
    Growing list of ``(row, col, value)`` triplets of an ``m x n`` matrix.

    Duplicates are allowed and summed by ``compress``.
    """

    shape: tuple[int, int]
    _rows: list[np.ndarray] = field(default_factory=list, repr=False)
    _cols: list[np.ndarray] = field(default_factory=list, repr=False)
    _vals: list[np.ndarray] = field(default_factory=list, repr=False)

    def add(self, rows, cols, values) -> None:
        """
        Append triplets.

        Args:
            rows: Row indices (scalar or array).
            cols: Column indices, same shape as ``rows``.
            values: Values, same shape as ``rows``.

        Raises:
            IndexError: If an index is out of range.
        """
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if not rows.shape == cols.shape == values.shape:
            raise ValueError("rows, cols and values must have the same length")
        m, n = self.shape
        if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise IndexError(f"triplet index out of range for a {m}x{n} matrix")
        self._rows.append(rows)
        self._cols.append(cols)
        self._vals.append(values)

    def add_dense_blocks(self, dofs_row: np.ndarray, dofs_col: np.ndarray, blocks: np.ndarray):
        """Scatter ``(E, a, b)`` element blocks with ``(E, a)`` / ``(E, b)`` dof maps."""
        rows = np.broadcast_to(dofs_row[:, :, None], blocks.shape)
        cols = np.broadcast_to(dofs_col[:, None, :], blocks.shape)
        self.add(rows, cols, blocks)

    def __len__(self) -> int:
        return int(sum(r.size for r in self._rows))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self._rows:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), np.zeros(0)
        return np.concatenate(self._rows), np.concatenate(self._cols), np.concatenate(self._vals)


@dataclass(frozen=True)
class SparseMatrix:
    """
    Immutable compressed-row matrix.

    Attributes:
        csr: Underlying ``scipy.sparse.csr_matrix`` with sorted indices.
    """

    csr: sp.csr_matrix

    @property
    def shape(self) -> tuple[int, int]:
        return self.csr.shape

    @property
    def indptr(self) -> np.ndarray:
        return self.csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.csr.indices

    @property
    def data(self) -> np.ndarray:
        return self.csr.data

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def norm_inf(self) -> float:
        if self.csr.nnz == 0:
            return 0.0
        return float(np.max(np.asarray(abs(self.csr).sum(axis=1)).ravel()))

    @classmethod
    def from_scipy(cls, matrix) -> "SparseMatrix":
        csr = sp.csr_matrix(matrix)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr)


def compress(t: TripletList) -> SparseMatrix:
    """
    Sum duplicate triplets into a compressed-row matrix.

    Structural zeros are kept.
    """
    rows, cols, vals = t.arrays()
    csr = sp.coo_matrix((vals, (rows, cols)), shape=t.shape).tocsr()
    csr.sum_duplicates()
    csr.sort_indices()
    return SparseMatrix(csr)


def matvec(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """
    Return ``A x``.

    Raises:
        ValueError: On a dimension mismatch.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != a.shape[1]:
        raise ValueError(f"cannot multiply a {a.shape[0]}x{a.shape[1]} matrix by shape {x.shape}")
    return a.csr @ x


def equilibrate(a: SparseMatrix) -> tuple[np.ndarray, np.ndarray]:
    """
    Row and column scalings ``r, c`` such that ``diag(r) A diag(c)`` has
    largest entry 1 in every nonzero row and column.

    Empty rows and columns get the factor 1.
    """
    magnitude = abs(a.csr)
    row_max = np.asarray(magnitude.max(axis=1).todense()).ravel()
    rows = np.where(row_max > 0.0, 1.0 / np.where(row_max > 0.0, row_max, 1.0), 1.0)
    col_max = np.asarray((sp.diags(rows) @ magnitude).max(axis=0).todense()).ravel()
    cols = np.where(col_max > 0.0, 1.0 / np.where(col_max > 0.0, col_max, 1.0), 1.0)
    return rows, cols


def solve_direct(a: SparseMatrix, rhs: np.ndarray, check: bool = False) -> np.ndarray:
    """
    Solve ``A x = rhs`` by sparse LU with partial pivoting.

    The matrix is equilibrated first; the pivot ratio is measured on the
    equilibrated factors and the backward error on the original system.

    Args:
        a: Square nonsingular matrix.
        rhs: Right-hand side.
        check: Raise instead of warn when the backward error exceeds
            ``1e-8 (||A|| ||x|| + ||rhs||)``.

    Returns:
        Solution vector.

    Raises:
        SolverError: If the matrix is numerically singular, or if ``check``
            is set and the backward error bound fails.
    """
    rhs = np.asarray(rhs, dtype=float)
    m, n = a.shape
    if m != n:
        raise ValueError(f"matrix must be square, got {m}x{n}")
    if rhs.shape != (n,):
        raise ValueError(f"right-hand side has shape {rhs.shape}, expected ({n},)")
    if n == 0:
        return np.zeros(0)

    rows, cols = equilibrate(a)
    scaled = sp.diags(rows) @ a.csr @ sp.diags(cols)
    try:
        lu = splu(scaled.tocsc(), permc_spec="COLAMD")
    except RuntimeError as e:
        raise SolverError(f"matrix is singular: {e}", condition=float("inf")) from e

    pivots = np.abs(lu.U.diagonal())
    ratio = pivots.min() / pivots.max() if pivots.max() > 0 else 0.0
    condition = 1.0 / ratio if ratio > 0 else float("inf")
    if ratio < PIVOT_RATIO_TOL:
        raise SolverError(
            f"matrix is numerically singular (pivot ratio {ratio:.3e}, "
            f"condition estimate {condition:.3e})",
            condition=condition,
        )

    x = cols * lu.solve(rows * rhs)
    residual = np.linalg.norm(a.csr @ x - rhs, np.inf)
    bound = BACKWARD_TOL * (a.norm_inf() * np.linalg.norm(x, np.inf) + np.linalg.norm(rhs, np.inf))
    logger.debug(
        "solved n=%d nnz=%d residual=%.3e bound=%.3e pivot-condition=%.3e",
        n,
        a.nnz,
        residual,
        bound,
        condition,
    )
    if residual > bound:
        message = (
            f"backward error {residual:.3e} exceeds {bound:.3e} "
            f"(condition estimate {condition:.3e})"
        )
        if check:
            raise SolverError(message, condition=condition)
        logger.warning(message)
    return x
