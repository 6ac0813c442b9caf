"""Sparse Cholesky factorization of regularized Laplacians and a pruned
sparse approximation to the inverse of the triangular factor.

Factorization is delegated to SuperLU in symmetric mode (no pivoting, the
input is SPD), which supplies the fill-reducing ordering and elimination
structure; the factor is rescaled to a true Cholesky factor L with
L L^T = A permuted. The approximate inverse is built column by column from
the back-substitution recurrence

    z_j = (1/L_jj) e_j + sum_{i>j, L_ij != 0} (-L_ij / L_jj) z_i

with threshold pruning, which keeps every column sparse while all entries
stay nonnegative (L is an M-matrix factor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import RegularizedLaplacian


class FactorizationError(RuntimeError):
    """Numeric factorization failed (broken SPD precondition)."""


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor of a permuted SPD matrix.

    ``lower @ lower.T == A[perm][:, perm]`` up to round-off, where ``perm``
    maps permuted positions to original indices and ``iperm`` is its inverse.
    When built by :func:`factorize` the SuperLU object is kept for fast
    forward/backward solves.
    """

    lower: sp.csc_matrix
    perm: np.ndarray   # permuted position -> original index
    iperm: np.ndarray  # original index -> permuted position
    _lu: object | None = None

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    @property
    def nnz(self) -> int:
        return self.lower.nnz

    @classmethod
    def from_lower_triangular(cls, lower: sp.spmatrix,
                              perm: np.ndarray | None = None) -> "CholeskyFactor":
        """Wrap an explicit lower-triangular factor (natural order by default)."""
        lower = sp.csc_matrix(lower)
        lower.sort_indices()
        n = lower.shape[0]
        if perm is None:
            perm = np.arange(n, dtype=np.int64)
        iperm = np.argsort(perm)
        return cls(lower=lower, perm=np.asarray(perm), iperm=iperm)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve A x = b for the factorized matrix A."""
        if self._lu is not None:
            return self._lu.solve(np.asarray(b, dtype=np.float64))
        y = spla.spsolve_triangular(self.lower, np.asarray(b)[self.perm], lower=True)
        z = spla.spsolve_triangular(self.lower.T.tocsr(), y, lower=False)
        out = np.empty_like(z)
        out[self.perm] = z
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Apply the factorized matrix A (inverse map of :meth:`solve`)."""
        y = self.lower.T @ np.asarray(x)[self.perm]
        z = self.lower @ y
        out = np.empty_like(z)
        out[self.perm] = z
        return out


def factorize(a: RegularizedLaplacian, ordering: str = "amd") -> CholeskyFactor:
    """Sparse Cholesky factorization of an SPD regularized Laplacian.

    Parameters
    ----------
    a : RegularizedLaplacian
        Symmetric positive definite input.
    ordering : {"amd", "natural"}
        "amd" uses a minimum-degree fill-reducing ordering, "natural" keeps
        the input order (mainly for tests and oracles).

    Raises :class:`FactorizationError` on a nonpositive pivot.
    """
    if ordering not in ("amd", "natural"):
        raise ValueError(f"unknown ordering {ordering!r}")
    permc = "MMD_AT_PLUS_A" if ordering == "amd" else "NATURAL"
    mat = a.matrix.tocsc()
    try:
        lu = spla.splu(mat, permc_spec=permc, diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError as exc:  # SuperLU signals singularity this way
        raise FactorizationError(str(exc)) from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationError("row/column permutations diverged; input not symmetric?")
    pivots = lu.U.diagonal()
    if np.any(pivots <= 0):
        raise FactorizationError("nonpositive pivot; matrix is not positive definite")
    lower = lu.L.multiply(np.sqrt(pivots)).tocsc()
    lower.sort_indices()
    iperm = np.asarray(lu.perm_c, dtype=np.int64)   # original -> permuted position
    perm = np.argsort(iperm)
    return CholeskyFactor(lower=lower, perm=perm, iperm=iperm, _lu=lu)


def solve(f: CholeskyFactor, b: np.ndarray) -> np.ndarray:
    """Solve the factorized system for one right-hand side."""
    return f.solve(b)


@dataclass(frozen=True)
class ApproxInverse:
    """Column-sparse approximation to the inverse of a Cholesky factor.

    Columns live in permuted coordinates and are lower triangular with
    nonnegative entries; ``columns[:, j]`` approximates column j of L^-1.
    ``keep_floor`` columns with at most ``max(1, ceil(ln n))`` nonzeros are
    kept unpruned regardless of the threshold.
    """

    columns: sp.csc_matrix
    delta: float
    keep_floor: int
    perm: np.ndarray
    iperm: np.ndarray

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def nnz(self) -> int:
        return self.columns.nnz

    @cached_property
    def rows(self) -> sp.csr_matrix:
        """Row-major view, used by the batched score evaluation."""
        return self.columns.tocsr()

    def column(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """(row indices, values) of permuted column ``k``."""
        a, b = self.columns.indptr[k], self.columns.indptr[k + 1]
        return self.columns.indices[a:b], self.columns.data[a:b]


def approx_inverse(f: CholeskyFactor, delta: float) -> ApproxInverse:
    """Build the pruned sparse approximation to L^-1, columns n down to 1.

    Each column seeds with (1/L_jj) e_j, accumulates the already-approximated
    columns below it, and then zeroes entries smaller than ``delta`` times the
    column maximum; the diagonal entry is never pruned and short columns
    (nnz <= ceil(ln n)) are kept as computed.
    """
    if not (0 <= delta < 1):
        raise ValueError("delta must satisfy 0 <= delta < 1")
    L = f.lower
    n = L.shape[0]
    indptr, rows_of, vals_of = L.indptr, L.indices, L.data
    keep_floor = max(1, math.ceil(math.log(n))) if n > 1 else 1

    scratch = np.zeros(n)
    col_idx: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    col_val: list[np.ndarray] = [None] * n  # type: ignore[list-item]

    for j in range(n - 1, -1, -1):
        a, b = indptr[j], indptr[j + 1]
        rows = rows_of[a:b]
        vals = vals_of[a:b]
        ljj = vals[0]  # sorted indices: the diagonal leads the column
        parts = [np.array([j], dtype=np.int64)]
        scratch[j] += 1.0 / ljj
        for t in range(1, len(rows)):
            coef = -vals[t] / ljj
            if coef == 0.0:
                continue
            zi = col_idx[rows[t]]
            scratch[zi] += coef * col_val[rows[t]]
            parts.append(zi)
        touched = parts[0] if len(parts) == 1 else np.unique(np.concatenate(parts))
        tvals = scratch[touched]
        scratch[touched] = 0.0

        positive = tvals > 0
        if int(positive.sum()) > keep_floor and delta > 0:
            keep = tvals >= delta * tvals.max()
            keep[touched == j] = True  # the column's own seed always survives
        else:
            keep = positive
            keep[touched == j] = True
        col_idx[j] = touched[keep]
        col_val[j] = tvals[keep]

    lengths = np.array([len(c) for c in col_idx], dtype=np.int64)
    out_indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lengths, out=out_indptr[1:])
    mat = sp.csc_matrix((np.concatenate(col_val), np.concatenate(col_idx), out_indptr),
                        shape=(n, n))
    return ApproxInverse(columns=mat, delta=delta, keep_floor=keep_floor,
                         perm=f.perm, iperm=f.iperm)


def approx_column_dot(z: ApproxInverse, i: int, j: int, p: int, q: int) -> float:
    """Inner product (z_i - z_j) . (z_p - z_q) for original vertex ids.

    With an unpruned inverse this equals e_ij^T A^-1 e_pq for the factorized
    matrix A; in particular the (p,q,p,q) case is the effective resistance.
    """
    xi, xv = _column_diff(z, i, j)
    if i == p and j == q:
        return float(xv @ xv)
    yi, yv = _column_diff(z, p, q)
    return _sparse_dot(xi, xv, yi, yv)


def _column_diff(z: ApproxInverse, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Sparse vector for column(perm(a)) - column(perm(b)); empty when a == b."""
    if a == b:
        return np.empty(0, dtype=np.int64), np.empty(0)
    ia, va = z.column(int(z.iperm[a]))
    ib, vb = z.column(int(z.iperm[b]))
    idx = np.concatenate([ia, ib])
    val = np.concatenate([va, -vb])
    uidx, inv = np.unique(idx, return_inverse=True)
    uval = np.bincount(inv, weights=val)
    return uidx, uval


def _sparse_dot(ai, av, bi, bv) -> float:
    common, ka, kb = np.intersect1d(ai, bi, assume_unique=True, return_indices=True)
    if len(common) == 0:
        return 0.0
    return float(av[ka] @ bv[kb])
