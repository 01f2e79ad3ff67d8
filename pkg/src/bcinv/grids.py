"""Uniform time/space grids with trapezoid quadrature weights.

All discrete inner products in this package are weighted sums
``<f, g> = sum_i w_i f_i g_i`` with trapezoid weights, so that nodal values
and quadrature share one sample set.  Discrete adjoints are always taken
with respect to this weighted product: ``A* = W^{-1} A^T W`` with ``W`` the
diagonal of weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "SpaceGrid",
    "GridFunction",
    "make_time_grid",
    "make_space_grid",
    "inner_product",
    "weighted_norm",
    "sampled_indicator",
]


def _trapezoid_weights(n_intervals: int, step: float) -> np.ndarray:
    w = np.full(n_intervals + 1, step)
    w[0] = 0.5 * step
    w[-1] = 0.5 * step
    return w


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Uniform grid on (0, 2T) with n_t intervals; T itself is a node."""

    T: float
    n_t: int
    dt: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.n_t + 1

    @property
    def half_index(self) -> int:
        """Index of the node t = T."""
        return self.n_t // 2

    def radius_index(self, r: float) -> int:
        """Map a grid-aligned radius r in [0, T] to its node count.

        Raises ValueError if r is not a multiple of dt (within roundoff)
        or lies outside [0, T].
        """
        k = int(round(r / self.dt))
        if abs(k * self.dt - r) > 1e-9 * max(1.0, 2.0 * self.T):
            raise ValueError(f"radius {r} is not a multiple of dt={self.dt}")
        if k < 0 or k > self.half_index:
            raise ValueError(f"radius {r} outside [0, T={self.T}]")
        return k


@dataclass(frozen=True, eq=False)
class SpaceGrid:
    """Uniform grid on [0, x_max] with n_x intervals."""

    x_max: float
    n_x: int
    dx: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.n_x + 1


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a scalar function at the nodes of one grid."""

    grid: TimeGrid | SpaceGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"expected {self.grid.n_nodes} samples, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function contains non-finite samples")
        object.__setattr__(self, "values", values)

    def to_csv(self, path) -> None:
        data = np.column_stack([self.grid.nodes, self.values])
        np.savetxt(path, data, delimiter=",", header="node,value", comments="")


def make_time_grid(T: float, n_t: int) -> TimeGrid:
    """Build the (0, 2T) grid.  n_t must be even so that t = T is a node."""
    if T <= 0:
        raise ValueError(f"horizon T must be positive, got {T}")
    if n_t < 2:
        raise ValueError(f"need at least 2 intervals, got {n_t}")
    if n_t % 2 != 0:
        raise ValueError(f"n_t must be even so that T is a grid node, got {n_t}")
    dt = 2.0 * T / n_t
    nodes = dt * np.arange(n_t + 1)
    return TimeGrid(T=T, n_t=n_t, dt=dt, nodes=nodes,
                    weights=_trapezoid_weights(n_t, dt))


def make_space_grid(x_max: float, n_x: int) -> SpaceGrid:
    if x_max <= 0 or n_x < 2:
        raise ValueError(f"invalid space grid: x_max={x_max}, n_x={n_x}")
    dx = x_max / n_x
    nodes = dx * np.arange(n_x + 1)
    return SpaceGrid(x_max=x_max, n_x=n_x, dx=dx, nodes=nodes,
                     weights=_trapezoid_weights(n_x, dx))


def _require_same_grid(f: GridFunction, g: GridFunction) -> None:
    if f.grid is not g.grid and not (
        f.grid.n_nodes == g.grid.n_nodes
        and np.allclose(f.grid.nodes, g.grid.nodes)
    ):
        raise ValueError("grid functions live on different grids")


def inner_product(f: GridFunction, g: GridFunction) -> float:
    """Weighted L2 product; exact for piecewise-linear integrands."""
    _require_same_grid(f, g)
    return float(np.sum(f.grid.weights * f.values * g.values))


def weighted_norm(f: GridFunction) -> float:
    return float(np.sqrt(np.sum(f.grid.weights * f.values**2)))


def sampled_indicator(grid: TimeGrid | SpaceGrid, a: float, b: float) -> GridFunction:
    """Nodal samples of the indicator of (a, b), with value 1/2 at nodes
    that sit exactly on a jump.

    The half values are the mean of the one-sided limits; with trapezoid
    weights this reproduces the L2 mass of the indicator to second order.
    """
    nodes = grid.nodes
    tol = 1e-12 * max(1.0, abs(b - a))
    values = ((nodes > a + tol) & (nodes < b - tol)).astype(float)
    values[np.abs(nodes - a) <= tol] = 0.5
    values[np.abs(nodes - b) <= tol] = 0.5
    return GridFunction(grid=grid, values=values)
