"""Quadrature-FEM matrices and the dimension-split diffusion operator.

The 2D operator splits as L = A + B where A acts along x with coefficient
lambda(x)*mu(y) and B along y.  With trapezoidal quadrature the mass matrix
is h^2*I and the stiffness matrices factor into Kronecker products of a 1D
tridiagonal stiffness matrix and a diagonal coefficient matrix, so A and B
apply line by line and their resolvents reduce to batched tridiagonal
solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import Field, Grid

COEFF_SAMPLE_POINTS = 10_001


@dataclass(frozen=True)
class TridiagonalMatrix:
    """Symmetric tridiagonal matrix stored as diagonal and off-diagonal."""

    diag: np.ndarray
    off: np.ndarray  # sub- and super-diagonal, length n-1

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply along the last axis of ``x``."""
        y = self.diag * x
        y[..., 1:] += self.off * x[..., :-1]
        y[..., :-1] += self.off * x[..., 1:]
        return y

    def to_dense(self) -> np.ndarray:
        return (
            np.diag(self.diag)
            + np.diag(self.off, 1)
            + np.diag(self.off, -1)
        )


def assemble_1d_stiffness(c, grid: Grid) -> TridiagonalMatrix:
    """1D trapezoidal-quadrature stiffness matrix for coefficient c.

    Entries follow the nodal-coefficient formula
        diag[i] = (c(x_{i-1}) + 2 c(x_i) + c(x_{i+1})) / 2,
        off[i]  = -(c(x_i) + c(x_{i+1})) / 2,
    for interior nodes i = 1..m-1.  There is no 1/h factor: the scaling
    pairs with the lumped mass matrix h^2*I.
    """
    cv = np.asarray(c(grid.nodes()), dtype=float)
    diag = 0.5 * (cv[:-2] + 2.0 * cv[1:-1] + cv[2:])
    off = -0.5 * (cv[1:-2] + cv[2:-1])
    return TridiagonalMatrix(diag, off)


class _BatchedThomasFactors:
    """Prefactored batch of shifted tridiagonal systems I + gamma[r] * K.

    Each system in the batch is symmetric positive definite (K is PSD and
    gamma > 0), so the Thomas algorithm needs no pivoting.  Work arrays are
    stored transposed, shape (n, batch), so each elimination step touches a
    contiguous row.
    """

    def __init__(self, k1d: TridiagonalMatrix, gamma: np.ndarray):
        n = k1d.n
        b = 1.0 + np.outer(k1d.diag, gamma)        # (n, batch)
        a = np.outer(k1d.off, gamma)               # (n-1, batch)
        inv = np.empty_like(b)
        cp = np.empty_like(a)
        inv[0] = 1.0 / b[0]
        for i in range(1, n):
            cp[i - 1] = a[i - 1] * inv[i - 1]
            inv[i] = 1.0 / (b[i] - a[i - 1] * cp[i - 1])
        self.n = n
        self.a = a
        self.cp = cp
        self.inv = inv

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve all systems; ``rhs`` has one line per row, shape (batch, n)."""
        n = self.n
        d = np.empty((n, rhs.shape[0]))
        r = rhs.T
        d[0] = r[0] * self.inv[0]
        for i in range(1, n):
            d[i] = (r[i] - self.a[i - 1] * d[i - 1]) * self.inv[i]
        for i in range(n - 2, -1, -1):
            d[i] -= self.cp[i] * d[i + 1]
        return np.ascontiguousarray(d.T)


@dataclass
class SplitDiffusionOperator:
    """Realizes A, B, L = A + B and their resolvents for lambda(x)*mu(y).

    ``k_lambda`` and ``k_mu`` are the 1D stiffness matrices, ``d_lambda`` and
    ``d_mu`` the coefficient samples at interior nodes.  The full 2D
    stiffness matrices are never formed; every application is a set of
    independent 1D line operations.
    """

    grid: Grid
    k_lambda: TridiagonalMatrix
    k_mu: TridiagonalMatrix
    d_lambda: np.ndarray
    d_mu: np.ndarray
    lambda_inf: float
    mu_inf: float
    lambda_0: float
    mu_0: float
    _thomas_cache: dict = dc_field(default_factory=dict, repr=False)
    _kron_factorization: object = dc_field(default=None, repr=False)

    # -- forward applications -------------------------------------------------

    def apply_a(self, u: Field) -> Field:
        """A u: per x-line, -(mu(y_j)/h^2) * K_lambda acting along i."""
        self._check(u)
        h2 = self.grid.h ** 2
        out = self.k_lambda.matvec(u.values.copy())
        out *= -self.d_mu[:, None] / h2
        return Field(self.grid, out)

    def apply_b(self, u: Field) -> Field:
        """B u: per y-line, -(lambda(x_i)/h^2) * K_mu acting along j."""
        self._check(u)
        h2 = self.grid.h ** 2
        out = self.k_mu.matvec(np.ascontiguousarray(u.values.T)).T
        out = out * (-self.d_lambda[None, :] / h2)
        return Field(self.grid, out)

    def apply_l(self, u: Field) -> Field:
        self._check(u)
        return Field(self.grid, self.apply_a(u).values + self.apply_b(u).values)

    # -- resolvents -----------------------------------------------------------

    def solve_resolvent_a(self, kappa: float, rhs: Field) -> Field:
        """Solve (I - kappa*A) w = rhs via one Thomas sweep per x-line."""
        self._check(rhs)
        fac = self._factors("a", kappa)
        return Field(self.grid, fac.solve(rhs.values))

    def solve_resolvent_b(self, kappa: float, rhs: Field) -> Field:
        """Solve (I - kappa*B) w = rhs via one Thomas sweep per y-line."""
        self._check(rhs)
        fac = self._factors("b", kappa)
        out = fac.solve(np.ascontiguousarray(rhs.values.T))
        return Field(self.grid, np.ascontiguousarray(out.T))

    def _factors(self, axis: str, kappa: float) -> _BatchedThomasFactors:
        if kappa <= 0.0:
            raise ValueError(f"resolvent step kappa must be positive, got {kappa}")
        key = (axis, kappa)
        fac = self._thomas_cache.get(key)
        if fac is None:
            h2 = self.grid.h ** 2
            if axis == "a":
                fac = _BatchedThomasFactors(self.k_lambda, kappa * self.d_mu / h2)
            else:
                fac = _BatchedThomasFactors(self.k_mu, kappa * self.d_lambda / h2)
            self._thomas_cache[key] = fac
        return fac

    def _check(self, u: Field) -> None:
        if u.grid != self.grid:
            raise ValueError(
                f"field grid m={u.grid.m} does not match operator grid m={self.grid.m}"
            )


def assemble_split_operator(lam, mu, grid: Grid) -> SplitDiffusionOperator:
    """Build the split operator for coefficients lambda(x) and mu(y).

    Coefficient extrema are estimated by dense sampling on a uniform grid of
    COEFF_SAMPLE_POINTS points; a non-positive sample is rejected.
    """
    xs = np.linspace(0.0, 1.0, COEFF_SAMPLE_POINTS)
    lam_s = np.asarray(lam(xs), dtype=float)
    mu_s = np.asarray(mu(xs), dtype=float)
    if np.min(lam_s) <= 0.0 or np.min(mu_s) <= 0.0:
        raise ValueError("coefficients must be strictly positive on [0,1]")
    xi = grid.interior_nodes()
    return SplitDiffusionOperator(
        grid=grid,
        k_lambda=assemble_1d_stiffness(lam, grid),
        k_mu=assemble_1d_stiffness(mu, grid),
        d_lambda=np.asarray(lam(xi), dtype=float),
        d_mu=np.asarray(mu(xi), dtype=float),
        lambda_inf=float(np.max(lam_s)),
        mu_inf=float(np.max(mu_s)),
        lambda_0=float(np.min(lam_s)),
        mu_0=float(np.min(mu_s)),
    )


def stability_bound(op: SplitDiffusionOperator) -> float:
    """Coefficient-extrema bound sqrt(|lambda|_inf |mu|_inf / (lambda_0 mu_0))."""
    return float(
        np.sqrt(op.lambda_inf * op.mu_inf / (op.lambda_0 * op.mu_0))
    )


def stability_norm_estimate(
    op: SplitDiffusionOperator,
    handle=None,
    iters: int = 200,
    tol: float = 1e-8,
) -> float:
    """Power-iteration estimate of the operator norm of A L^{-1} in ||.||_h.

    Since ||.||_h is a scalar multiple of the Euclidean norm, this equals
    the 2-norm of K_A (K_A + K_B)^{-1}.  Both factors are symmetric, so the
    adjoint composite is L^{-1} A and the iteration runs on G^T G.
    """
    from . import linsolve

    if handle is None:
        handle = linsolve.LinearSolverHandle(method="kronecker")

    def forward(v: Field) -> Field:
        return op.apply_a(linsolve.solve_lh(op, v, handle))

    def adjoint(v: Field) -> Field:
        return linsolve.solve_lh(op, op.apply_a(v), handle)

    result = linsolve.power_iteration_fields(
        op.grid, forward, adjoint, iters=iters, tol=tol
    )
    return result.value
