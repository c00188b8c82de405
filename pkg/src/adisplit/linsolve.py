"""Solvers for the full 2D operator.

Two routes for L v = f: matrix-free conjugate gradient on the SPD stiffness
system, and a fast direct solver that diagonalizes the Kronecker-sum
structure with two 1D symmetric-tridiagonal eigendecompositions.  Power
iteration estimates operator 2-norms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .grid import Field, Grid


class NonConvergenceError(RuntimeError):
    """Iterative solve missed its tolerance; carries the residual history."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


@dataclass
class LinearSolverHandle:
    """Solver selection for (sigma*I - L)-type SPD systems."""

    method: str = "cg"  # "cg" | "kronecker"
    tol: float = 1e-12
    max_iter: int | None = None

    def __post_init__(self):
        if self.method not in ("cg", "kronecker"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not 0.0 < self.tol <= 1e-2:
            raise ValueError(f"tol must be in (0, 1e-2], got {self.tol}")


def conjugate_gradient(
    matvec: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float = 1e-12,
    max_iter: int | None = None,
) -> np.ndarray:
    """Plain CG for an SPD operator, relative-residual stopping rule.

    Dot products use numpy's fixed pairwise reduction, so a given system
    solves to bitwise-identical iterates on repeated runs.
    """
    b = np.asarray(b, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    if max_iter is None:
        max_iter = 10 * b.size
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    history = [np.sqrt(rs) / bnorm]
    for _ in range(max_iter):
        if history[-1] <= tol:
            return x
        Ap = matvec(p)
        alpha = rs / float(p @ Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = float(r @ r)
        history.append(np.sqrt(rs_new) / bnorm)
        p = r + (rs_new / rs) * p
        rs = rs_new
    if history[-1] <= tol:
        return x
    raise NonConvergenceError(
        f"CG did not reach relative residual {tol} in {max_iter} iterations "
        f"(last residual {history[-1]:.3e})",
        residuals=history,
    )


class KroneckerFactorization:
    """Fast direct solver for the 2D stiffness sum K_A + K_B.

    After symmetrizing with the diagonal coefficient matrix D, the sum
    becomes a Kronecker sum of two symmetric tridiagonal matrices; their
    eigendecompositions reduce each solve to two dense 1D transforms per
    direction and one diagonal division over pairwise eigenvalue sums.
    """

    def __init__(self, op):
        dl = op.d_lambda
        dm = op.d_mu
        self.dl_isqrt = 1.0 / np.sqrt(dl)
        self.dm_isqrt = 1.0 / np.sqrt(dm)
        s_lam_diag = op.k_lambda.diag / dl
        s_lam_off = op.k_lambda.off * self.dl_isqrt[:-1] * self.dl_isqrt[1:]
        s_mu_diag = op.k_mu.diag / dm
        s_mu_off = op.k_mu.off * self.dm_isqrt[:-1] * self.dm_isqrt[1:]
        self.theta_lam, self.v_lam = eigh_tridiagonal(s_lam_diag, s_lam_off)
        self.theta_mu, self.v_mu = eigh_tridiagonal(s_mu_diag, s_mu_off)
        if np.min(self.theta_lam) < -1e-10 or np.min(self.theta_mu) < -1e-10:
            raise RuntimeError("symmetrized 1D stiffness has a negative eigenvalue")
        # (j, i)-shaped denominator of eigenvalue sums
        self.denom = self.theta_mu[:, None] + self.theta_lam[None, :]

    def solve_stiffness(self, rhs: np.ndarray) -> np.ndarray:
        """Solve (K_A + K_B) x = rhs for a (n, n) array with rows indexed by j."""
        w = rhs * np.outer(self.dm_isqrt, self.dl_isqrt)
        c = self.v_mu.T @ w @ self.v_lam
        c /= self.denom
        w = self.v_mu @ c @ self.v_lam.T
        return w * np.outer(self.dm_isqrt, self.dl_isqrt)


def kronecker_direct_prepare(op) -> KroneckerFactorization:
    """Build (and cache on the operator) the fast-diagonalization factors."""
    if op._kron_factorization is None:
        op._kron_factorization = KroneckerFactorization(op)
    return op._kron_factorization


def stiffness_matvec(op, v: np.ndarray) -> np.ndarray:
    """(K_A + K_B) v, matrix-free; equals -h^2 * (L applied to v)."""
    return -(op.grid.h ** 2) * op.apply_l(Field(op.grid, v)).values


def solve_lh(op, f: Field, handle: LinearSolverHandle | None = None) -> Field:
    """Solve L v = f, i.e. the SPD system (K_A + K_B) v = -h^2 f."""
    if handle is None:
        handle = LinearSolverHandle()
    rhs = -(op.grid.h ** 2) * f.values
    if handle.method == "kronecker":
        x = kronecker_direct_prepare(op).solve_stiffness(rhs)
    else:
        n = op.grid.n
        flat = conjugate_gradient(
            lambda v: stiffness_matvec(op, v.reshape(n, n)).ravel(),
            rhs.ravel(),
            tol=handle.tol,
            max_iter=handle.max_iter,
        )
        x = flat.reshape(n, n)
    return Field(op.grid, x)


@dataclass
class PowerIterationResult:
    value: float
    converged: bool
    iterations: int


def power_iteration(
    forward: Callable[[np.ndarray], np.ndarray],
    adjoint: Callable[[np.ndarray], np.ndarray],
    n: int,
    iters: int = 200,
    tol: float = 1e-8,
    seed: int = 1234,
) -> PowerIterationResult:
    """Estimate the 2-norm of G by power iteration on G^T G.

    Runs at least ``iters`` iterations or until the estimate's relative
    change drops below ``tol``; a miss returns the best estimate flagged
    as unconverged.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for it in range(1, iters + 1):
        w = adjoint(forward(v))
        wn = float(np.linalg.norm(w))
        if wn == 0.0:
            return PowerIterationResult(0.0, True, it)
        new_est = float(np.sqrt(wn))  # ||G^T G v|| -> sigma_max^2
        v = w / wn
        if est > 0.0 and abs(new_est - est) <= tol * est:
            return PowerIterationResult(new_est, True, it)
        est = new_est
    return PowerIterationResult(est, False, iters)


def power_iteration_fields(
    grid: Grid,
    forward: Callable[[Field], Field],
    adjoint: Callable[[Field], Field],
    iters: int = 200,
    tol: float = 1e-8,
) -> PowerIterationResult:
    """Field-valued wrapper around :func:`power_iteration`."""
    n = grid.n

    def fwd(v):
        return forward(Field(grid, v.reshape(n, n))).values.ravel()

    def adj(v):
        return adjoint(Field(grid, v.reshape(n, n))).values.ravel()

    return power_iteration(fwd, adj, grid.interior_count, iters=iters, tol=tol)
