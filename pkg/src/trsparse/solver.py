"""Preconditioned conjugate gradient and the spectral diagnostics used to
judge preconditioner quality: power-iteration condition estimates, stochastic
trace estimates, and a dense generalized eigenvalue oracle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .cholesky import CholeskyFactor
from .graph import RegularizedLaplacian
from .scores import OracleSizeError


@dataclass(frozen=True)
class SolveContext:
    """One factorized preconditioner reused across many right-hand sides."""

    matrix: sp.spmatrix
    precond: CholeskyFactor
    tol: float = 1e-3
    max_iter: int = 5000

    @classmethod
    def for_laplacian(cls, lg: RegularizedLaplacian, precond: CholeskyFactor,
                      tol: float = 1e-3, max_iter: int = 5000) -> "SolveContext":
        if lg.n != precond.n:
            raise ValueError("preconditioner dimension mismatch")
        return cls(matrix=lg.matrix, precond=precond, tol=tol, max_iter=max_iter)


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    time_s: float


def pcg_solve(ctx: SolveContext, b: np.ndarray) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned CG from a zero start.

    Stops when the plain relative residual ||b - A x|| / ||b|| drops below
    ``ctx.tol``; one forward/backward substitution pair per iteration.
    Hitting ``max_iter`` yields a non-converged report, not an exception.
    """
    b = np.asarray(b, dtype=np.float64)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        raise ValueError("right-hand side must be nonzero")
    a = ctx.matrix
    t0 = time.perf_counter()
    x = np.zeros_like(b)
    r = b.copy()
    z = ctx.precond.solve(r)
    p = z
    rz = float(r @ z)
    res = 1.0
    it = 0
    while it < ctx.max_iter:
        it += 1
        ap = a @ p
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        res = float(np.linalg.norm(r) / bnorm)
        if res <= ctx.tol:
            break
        z = ctx.precond.solve(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveReport(iterations=it, residual=res, converged=res <= ctx.tol,
                          time_s=time.perf_counter() - t0)


def estimate_condition(lg: RegularizedLaplacian, lp_factor: CholeskyFactor,
                       iters: int = 50, seed: int = 0) -> float:
    """Power-iteration estimate of the largest generalized eigenvalue.

    Iterates x <- normalize(solve(L_P, L_G x)) from a seeded random start and
    returns the generalized Rayleigh quotient (x^T L_G x) / (x^T L_P x).
    With shared diagonal regularization the smallest generalized eigenvalue
    is one, so this is the relative condition number estimate.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(lg.n)
    x /= np.linalg.norm(x)
    for _ in range(iters):
        y = lp_factor.solve(lg.matrix @ x)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            break
        x = y / nrm
    num = float(x @ (lg.matrix @ x))
    den = float(x @ lp_factor.apply(x))
    return num / den


def estimate_trace(lg: RegularizedLaplacian, lp_factor: CholeskyFactor,
                   probes: int = 64, seed: int = 0) -> float:
    """Hutchinson estimate of trace(L_P^-1 L_G) with Rademacher probes."""
    if probes < 1:
        raise ValueError("probes must be >= 1")
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(probes):
        v = rng.integers(0, 2, size=lg.n).astype(np.float64) * 2.0 - 1.0
        total += float(v @ lp_factor.solve(lg.matrix @ v))
    return total / probes


def dense_generalized_eigs(lg: RegularizedLaplacian, ls: RegularizedLaplacian,
                           limit: int = 2000) -> tuple[float, float]:
    """Extremal eigenvalues of the pencil (L_G, L_S) by a dense solver."""
    if lg.n != ls.n:
        raise ValueError("dimension mismatch")
    if lg.n > limit:
        raise OracleSizeError(f"dense oracle limited to n <= {limit}, got {lg.n}")
    vals = scipy.linalg.eigh(lg.dense(), ls.dense(), eigvals_only=True)
    return float(vals[0]), float(vals[-1])
