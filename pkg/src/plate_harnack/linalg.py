"""Compressed sparse row matrices and a Jacobi-preconditioned conjugate gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SolverError(RuntimeError):
    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


@dataclass(eq=False)
class SparseMatrix:
    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        self.row_offsets = np.asarray(self.row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(self.col_indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        ro = self.row_offsets
        if ro.shape != (self.n_rows + 1,) or ro[0] != 0 or ro[-1] != self.col_indices.size:
            raise ValueError("row_offsets must have length n_rows+1 and span col_indices")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if self.col_indices.size != self.values.size:
            raise ValueError("col_indices and values differ in length")
        if self.col_indices.size:
            if self.col_indices.min() < 0 or self.col_indices.max() >= self.n_cols:
                raise ValueError("column index out of range")
            d = np.diff(self.col_indices)
            row_start = np.zeros(self.col_indices.size, dtype=bool)
            row_start[ro[:-1][np.diff(ro) > 0]] = True
            if np.any(d[~row_start[1:]] <= 0):
                raise ValueError("column indices must be strictly increasing within each row")

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, vals, symmetric=False) -> "SparseMatrix":
        """Build from triplets; duplicate entries are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            key_change = np.ones(rows.size, dtype=bool)
            key_change[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(key_change)
            vals = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
        counts = np.bincount(rows, minlength=n_rows)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return cls(n_rows, n_cols, offsets, cols, vals, symmetric)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n), True)

    @classmethod
    def from_dense(cls, a, symmetric=False) -> "SparseMatrix":
        a = np.asarray(a, dtype=float)
        r, c = np.nonzero(a)
        return cls.from_coo(a.shape[0], a.shape[1], r, c, a[r, c], symmetric)

    def row_indices(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))

    def diagonal(self) -> np.ndarray:
        rows = self.row_indices()
        on = rows == self.col_indices
        diag = np.zeros(min(self.n_rows, self.n_cols))
        diag[rows[on]] = self.values[on]
        return diag

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_indices(), self.col_indices] = self.values
        return out

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_coo(self.n_cols, self.n_rows, self.col_indices, self.row_indices(), self.values)

    def check_symmetric(self, n_samples: int = 200, seed: int = 0) -> bool:
        """Compare sampled entries against their transposed partners."""
        if self.n_rows != self.n_cols:
            return False
        if self.nnz == 0:
            return True
        rng = np.random.default_rng(seed)
        picks = rng.choice(self.nnz, size=min(n_samples, self.nnz), replace=False)
        rows = self.row_indices()[picks]
        cols = self.col_indices[picks]
        for i, j, v in zip(rows, cols, self.values[picks]):
            lo, hi = self.row_offsets[j], self.row_offsets[j + 1]
            k = lo + np.searchsorted(self.col_indices[lo:hi], i)
            if k >= hi or self.col_indices[k] != i or self.values[k] != v:
                return False
        return True

    def __matmul__(self, x):
        return spmv(self, x)


def spmv(A: SparseMatrix, x) -> np.ndarray:
    """y = A x; each row is summed sequentially in column order."""
    x = np.asarray(x, dtype=float)
    if x.shape != (A.n_cols,):
        raise ValueError(f"dimension mismatch: matrix has {A.n_cols} columns, vector has length {x.shape}")
    y = np.zeros(A.n_rows)
    if A.nnz == 0:
        return y
    prod = A.values * x[A.col_indices]
    nonempty = np.diff(A.row_offsets) > 0
    y[nonempty] = np.add.reduceat(prod, A.row_offsets[:-1][nonempty])
    return y


@dataclass
class SolveStats:
    iterations: int
    final_residual: float
    converged: bool
    refinements: int = 0


def spmv_extended(A: SparseMatrix, x) -> np.ndarray:
    """A x accumulated in extended precision (np.longdouble)."""
    vals = A.__dict__.get("_values_ld")
    if vals is None:
        vals = A.values.astype(np.longdouble)
        A.__dict__["_values_ld"] = vals
    x = np.asarray(x, dtype=np.longdouble)
    y = np.zeros(A.n_rows, dtype=np.longdouble)
    if A.nnz == 0:
        return y
    prod = vals * x[A.col_indices]
    nonempty = np.diff(A.row_offsets) > 0
    y[nonempty] = np.add.reduceat(prod, A.row_offsets[:-1][nonempty])
    return y


# allowed gap between recurrence and recomputed residual, relative to ||b||
_DRIFT_LIMIT = 1e-8


def _pcg(A, b, inv_diag, tol, max_iter):
    """Plain Jacobi-PCG from zero; stops on the recurrence residual."""
    bnorm = float(np.linalg.norm(b))
    x = np.zeros(A.n_rows)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    res = 1.0
    it = 0
    while res > tol and it < max_iter:
        Ap = spmv(A, p)
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        res = float(np.linalg.norm(r)) / bnorm
        it += 1
    true = float(np.linalg.norm(b - spmv(A, x))) / bnorm
    if abs(true - res) > _DRIFT_LIMIT:
        raise SolverError(f"CG recurrence residual {res:.3e} drifted from true residual {true:.3e}")
    return x, it


# one pass of float64 CG gains at most this factor before rounding of A x dominates
_INNER_FLOOR = 1e-7


def solve_spd(A: SparseMatrix, b, tol: float = 1e-10, max_iter: int | None = None, max_refine: int = 10):
    """Solve A x = b for symmetric positive definite A by Jacobi-preconditioned CG.

    Float64 CG passes are wrapped in iterative refinement whose residuals and
    iterate are carried in extended precision, so that relative residuals
    below the float64 representability floor of stiff biharmonic systems
    (about eps * ||A|| ||x|| / ||b||) are reachable.  Returns ``(x, stats)``
    where ``stats.final_residual`` is ||b - A x|| / ||b|| of the extended
    iterate; ``x`` is its float64 rounding.
    """
    b = np.asarray(b, dtype=float)
    n = A.n_rows
    if b.shape != (n,):
        raise ValueError("right-hand side has wrong length")
    if max_iter is None:
        max_iter = 50 * n
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveStats(0, 0.0, True, 0)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise ValueError("matrix diagonal must be positive for Jacobi preconditioning")
    inv_diag = 1.0 / diag

    x = np.zeros(n, dtype=np.longdouble)
    r = b.astype(np.longdouble)
    res = 1.0
    total = 0
    passes = 0
    while passes <= max_refine and total < max_iter:
        rnorm = float(np.linalg.norm(r.astype(float)))
        inner_tol = max(tol * bnorm / rnorm, _INNER_FLOOR)
        d, it = _pcg(A, r.astype(float), inv_diag, inner_tol, max_iter - total)
        total += it
        x += d
        r = b - spmv_extended(A, x)
        res = float(np.linalg.norm(r.astype(float))) / bnorm
        passes += 1
        if res <= tol:
            break
    return x.astype(float), SolveStats(total, res, bool(res <= tol), passes - 1)
