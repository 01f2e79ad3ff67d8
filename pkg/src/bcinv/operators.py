"""Boundary-data operator calculus: triangle integral, time reversal,
horizon ramp, window projectors, connecting operator and its windowed family.

Everything is a dense matrix acting on nodal values of the time grid.
Integral operators carry the trapezoid quadrature inside the matrix, so
composition is plain matrix multiplication; weighted adjoints are
``A* = W^{-1} A^T W``.

The connecting operator K = J Lambda - R Lambda R J turns interior energy
products of waves at time T into boundary data (Blagovestchenskii identity).
Its windowed restrictions H_r = Q_r K Q_r, with Q_r the indicator of the
late window (T - r, T), feed the regularized control solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import GridFunction, TimeGrid
from .forward import NtdMatrix

__all__ = [
    "triangle_matrix",
    "reversal_matrix",
    "apply_triangle",
    "apply_reversal",
    "horizon_ramp",
    "window_indices",
    "window_mask",
    "restrict",
    "ConnectingOperator",
    "connecting_operator",
    "RadiusFamily",
    "radius_family",
    "weighted_adjoint",
]


def triangle_matrix(grid: TimeGrid) -> np.ndarray:
    """Row i integrates 1/2 f over (t_i, 2T - t_i); zero for t_i >= T.

    Trapezoid weights over the window with the two boundary nodes
    half-counted, which keeps the connecting operator near self-adjoint.
    """
    n = grid.n_nodes
    J = np.zeros((n, n))
    dt = grid.dt
    for i in range(grid.half_index):
        j_hi = grid.n_t - i
        J[i, i:j_hi + 1] = 0.5 * dt
        J[i, i] = 0.25 * dt
        J[i, j_hi] = 0.25 * dt
    return J


def reversal_matrix(grid: TimeGrid) -> np.ndarray:
    """Permutation sending f(t) to f(2T - t)."""
    return np.eye(grid.n_nodes)[::-1].copy()


def apply_triangle(f: GridFunction) -> GridFunction:
    return GridFunction(grid=f.grid, values=triangle_matrix(f.grid) @ f.values)


def apply_reversal(f: GridFunction) -> GridFunction:
    return GridFunction(grid=f.grid, values=f.values[::-1].copy())


def horizon_ramp(grid: TimeGrid) -> GridFunction:
    """The ramp (T - t) on [0, T), zero from T on.

    This is the image of the constant source under the time filter
    f |-> 1_(0,T) int_t^T f, and the right-hand side of every control solve.
    """
    values = np.maximum(grid.T - grid.nodes, 0.0)
    return GridFunction(grid=grid, values=values)


def window_indices(grid: TimeGrid, r: float, window: str = "late") -> np.ndarray:
    """Node indices strictly inside the control window of radius r.

    "late" keeps (T - r, T): sources acting within travel time r of the
    snapshot time; "early" keeps (0, r).  Open intervals, so r = 0 gives an
    empty window.  r must be grid aligned.
    """
    k = grid.radius_index(r)
    half = grid.half_index
    if window == "late":
        return np.arange(half - k + 1, half)
    if window == "early":
        return np.arange(1, k)
    raise ValueError(f"unknown window kind: {window!r}")


def window_mask(grid: TimeGrid, r: float, window: str = "late") -> np.ndarray:
    mask = np.zeros(grid.n_nodes)
    mask[window_indices(grid, r, window)] = 1.0
    return mask


def restrict(f: GridFunction, r: float, window: str = "late") -> GridFunction:
    """Projector Q_r: zero all samples outside the control window."""
    return GridFunction(grid=f.grid,
                        values=f.values * window_mask(f.grid, r, window))


def weighted_adjoint(A: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """A* = W^{-1} A^T W for the diagonal weight matrix W."""
    return (A * weights[:, None]).T / weights[:, None]


@dataclass(frozen=True, eq=False)
class ConnectingOperator:
    """K as a dense matrix; built from noiseless data it is self-adjoint in
    the weighted product up to discretization error."""

    time_grid: TimeGrid
    matrix: np.ndarray

    def asymmetry(self) -> float:
        """Weighted-norm defect of self-adjointness, relative to scale."""
        w = self.time_grid.weights
        K_star = weighted_adjoint(self.matrix, w)
        sq = np.sqrt(w)
        scaled = sq[:, None] * self.matrix / sq[None, :]
        scaled_star = sq[:, None] * K_star / sq[None, :]
        denom = np.linalg.norm(scaled, 2)
        if denom == 0.0:
            return 0.0
        return float(np.linalg.norm(scaled - scaled_star, 2) / denom)


def connecting_operator(ntd: NtdMatrix) -> ConnectingOperator:
    """K = J Lambda - R Lambda R J on the nodal convention."""
    grid = ntd.time_grid
    J = triangle_matrix(grid)
    R = reversal_matrix(grid)
    lam = ntd.matrix
    K = J @ lam - R @ lam @ R @ J
    return ConnectingOperator(time_grid=grid, matrix=K)


@dataclass(frozen=True, eq=False)
class RadiusFamily:
    """The windowed operators H_r = Q_r K Q_r over a sampled radius set.

    Only the active blocks are materialized (H_r vanishes off the window).
    Blocks are symmetrized in the weighted product by default: the discrete
    quadratic energy only sees the symmetric part of K, so the symmetrized
    normal equations are exactly the stationarity condition of the energy,
    and symmetrization never increases operator norms.
    """

    time_grid: TimeGrid
    K: np.ndarray
    radii: np.ndarray
    window: str = "late"
    symmetrized: bool = True

    def indices(self, r: float) -> np.ndarray:
        return window_indices(self.time_grid, r, self.window)

    def block(self, r: float) -> np.ndarray:
        idx = self.indices(r)
        block = self.K[np.ix_(idx, idx)]
        if self.symmetrized:
            w = self.time_grid.weights[idx]
            block = 0.5 * (block + weighted_adjoint(block, w))
        return block

    def dense(self, r: float) -> np.ndarray:
        """H_r embedded back into the full grid (mostly for tests)."""
        n = self.time_grid.n_nodes
        H = np.zeros((n, n))
        idx = self.indices(r)
        H[np.ix_(idx, idx)] = self.block(r)
        return H


def radius_family(K: ConnectingOperator, radii, window: str = "late",
                  symmetrize: bool = True) -> RadiusFamily:
    """H: r -> Q_r K Q_r for each grid-aligned radius."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    for r in radii:
        K.time_grid.radius_index(r)  # validates alignment and range
    return RadiusFamily(time_grid=K.time_grid, K=K.matrix, radii=radii,
                        window=window, symmetrized=symmetrize)
