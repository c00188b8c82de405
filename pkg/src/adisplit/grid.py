"""Uniform unit-square meshes and piecewise-bilinear nodal fields.

The mesh covers (0,1)^2 with m subintervals per dimension and spacing
h = 1/m.  A :class:`Field` stores the nodal coefficients of a continuous,
piecewise-bilinear function that vanishes on the boundary; only interior
nodes are stored.  The discrete inner product is the trapezoidal
(mass-lumped) quadrature of the L2 inner product, which for
boundary-vanishing fields reduces exactly to h^2 times the Euclidean dot
product of the coefficient vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform square mesh on (0,1)^2 with ``m`` subintervals per dimension."""

    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"grid needs m >= 2 subintervals, got m={self.m}")

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def n(self) -> int:
        """Interior nodes per dimension."""
        return self.m - 1

    @property
    def interior_count(self) -> int:
        return (self.m - 1) ** 2

    def nodes(self) -> np.ndarray:
        """Per-dimension node coordinates x_i = i*h for i = 0..m."""
        return np.linspace(0.0, 1.0, self.m + 1)

    def interior_nodes(self) -> np.ndarray:
        return self.nodes()[1:-1]


@dataclass(frozen=True)
class Field:
    """Nodal coefficients of a bilinear FE function vanishing on the boundary.

    ``values[j, i]`` is the coefficient at the interior node (x_i, y_j); the
    x-index i is the last axis and therefore fastest-varying in memory, so
    x-line sweeps are contiguous.  Boundary values are implicitly zero and
    never stored.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        if self.values.shape != (n, n):
            raise ValueError(
                f"field shape {self.values.shape} does not match grid "
                f"(expected {(n, n)})"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    # small amount of vector-space sugar; every operation allocates fresh
    # storage so fields can be treated as immutable values
    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


@dataclass(frozen=True)
class ScalarFunction:
    """An evaluable real function of one or two variables with a name.

    ``fn`` must accept numpy arrays elementwise.  Coefficient-role functions
    are expected to be strictly positive on [0,1].
    """

    fn: Callable
    name: str = ""

    def __call__(self, *args):
        return self.fn(*args)


def _check_same_grid(u: Field, v: Field) -> None:
    if u.grid != v.grid:
        raise ValueError(f"grid mismatch: m={u.grid.m} vs m={v.grid.m}")


def zero_field(grid: Grid) -> Field:
    return Field(grid, np.zeros((grid.n, grid.n)))


def discrete_inner_product(u: Field, v: Field) -> float:
    """Trapezoidal-quadrature inner product (u, v)_h.

    For boundary-vanishing fields the element-loop quadrature collapses to
    h^2 * sum(U*V); the summation order is numpy's fixed pairwise reduction,
    so repeated runs are bitwise reproducible.
    """
    _check_same_grid(u, v)
    h = u.grid.h
    return h * h * float(np.sum(u.values * v.values))


def discrete_norm(u: Field) -> float:
    """||u||_h = h * Euclidean norm of the coefficient vector."""
    return u.grid.h * float(np.linalg.norm(u.values.ravel()))


def max_norm(u: Field) -> float:
    """Nodal max norm; equals the L-infinity norm of the bilinear function."""
    if u.grid.interior_count == 0:
        return 0.0
    return float(np.max(np.abs(u.values)))


def interpolate(g: Callable, grid: Grid) -> Field:
    """Nodal interpolant of g(x, y) onto the interior mesh nodes.

    This realizes the trapezoidal-quadrature orthogonal projection, which on
    continuous functions coincides with piecewise-bilinear interpolation.
    """
    xi = grid.interior_nodes()
    X, Y = np.meshgrid(xi, xi, indexing="xy")  # X[j, i] = x_i, Y[j, i] = y_j
    vals = np.asarray(g(X, Y), dtype=float)
    vals = np.broadcast_to(vals, (grid.n, grid.n)).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("interpolated values are not all finite")
    return Field(grid, vals)


def padded_values(u: Field) -> np.ndarray:
    """(m+1, m+1) nodal array including the zero boundary ring."""
    n = u.grid.n
    p = np.zeros((n + 2, n + 2))
    p[1:-1, 1:-1] = u.values
    return p


def _element_index(t: float, m: int) -> int:
    """1D element index containing coordinate t in [0,1].

    Points exactly on an element boundary belong to the element on the
    smaller-index side; FE continuity makes the value independent of this
    tie rule.
    """
    idx = int(np.ceil(t * m)) - 1
    return min(max(idx, 0), m - 1)


def evaluate_field(u: Field, x: float, y: float) -> float:
    """Exact value of the bilinear FE function at (x, y) in [0,1]^2."""
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"point ({x}, {y}) outside the unit square")
    m = u.grid.m
    h = u.grid.h
    ix = _element_index(x, m)
    iy = _element_index(y, m)
    s = x / h - ix
    t = y / h - iy
    p = padded_values(u)
    return float(
        (1 - s) * (1 - t) * p[iy, ix]
        + s * (1 - t) * p[iy, ix + 1]
        + (1 - s) * t * p[iy + 1, ix]
        + s * t * p[iy + 1, ix + 1]
    )


def _interp_matrix_1d(coarse: Grid, targets: np.ndarray) -> np.ndarray:
    """Rows evaluate the 1D hat basis (including boundary nodes) at targets."""
    m = coarse.m
    h = coarse.h
    P = np.zeros((targets.size, m + 1))
    for row, t in enumerate(targets):
        e = _element_index(float(t), m)
        s = t / h - e
        P[row, e] = 1.0 - s
        P[row, e + 1] += s
    return P


def prolong_to(u: Field, fine: Grid) -> Field:
    """Evaluate a coarse FE function exactly at the interior nodes of ``fine``.

    The grids need not be nested.  Since the bilinear interpolation factors
    per dimension, the evaluation is two small dense matrix products.
    """
    if fine == u.grid:
        return u.copy()
    P = _interp_matrix_1d(u.grid, fine.interior_nodes())
    vals = P @ padded_values(u) @ P.T
    return Field(fine, np.ascontiguousarray(vals))


def write_field(path, u: Field) -> None:
    """Text format: line 1 holds m; then (m-1)^2 values in storage order."""
    with open(path, "w") as f:
        f.write(f"{u.grid.m}\n")
        for v in u.values.ravel():
            f.write(f"{v:.17g}\n")


def read_field(path) -> Field:
    with open(path) as f:
        m = int(f.readline())
        grid = Grid(m)
        vals = np.array([float(line) for line in f if line.strip()])
    if vals.size != grid.interior_count:
        raise ValueError(
            f"field file holds {vals.size} values, expected {grid.interior_count}"
        )
    if not np.all(np.isfinite(vals)):
        raise ValueError("field file contains non-finite values")
    return Field(grid, vals.reshape(grid.n, grid.n))
