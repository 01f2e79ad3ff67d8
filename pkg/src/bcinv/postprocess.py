"""From volume curve to wave speed: difference quotient, reciprocal and
range clamps, travel-time integration, and the coordinate pullback.

All curves here are piecewise constant on the partition
(0,h), [h,2h), ..., [Nh, T) with T - h <= Nh < T, the natural resolution of
the regularized difference quotient; the integrated coordinate map is then
exactly piecewise linear, so inversion by monotone interpolation is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import SpaceGrid
from .control import VolumeEstimate

__all__ = [
    "DerivativeCurve",
    "SpeedEstimate",
    "MonotoneMap",
    "partition_edges",
    "discrete_derivative",
    "clamp_reciprocal",
    "clamp_speed",
    "integrate_speed",
    "pullback",
]


@dataclass(frozen=True, eq=False)
class DerivativeCurve:
    """Piecewise-constant difference quotient of a volume estimate."""

    edges: np.ndarray      # partition edges 0, h, 2h, ..., Nh, T
    values: np.ndarray     # one value per cell, len(edges) - 1
    h: float

    def __post_init__(self):
        if len(self.values) != len(self.edges) - 1:
            raise ValueError("need exactly one value per partition cell")

    def __call__(self, r) -> np.ndarray:
        idx = np.clip(np.searchsorted(self.edges, r, side="right") - 1,
                      0, len(self.values) - 1)
        return self.values[idx]


@dataclass(frozen=True, eq=False)
class SpeedEstimate:
    """Piecewise-constant speed on [0, T), identically 1 from T on."""

    edges: np.ndarray
    values: np.ndarray

    @property
    def T(self) -> float:
        return float(self.edges[-1])

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, r, side="right") - 1,
                      0, len(self.values) - 1)
        out = self.values[idx]
        return np.where(r >= self.T, 1.0, out)

    def to_csv(self, path) -> None:
        data = np.column_stack([self.edges[:-1], self.edges[1:], self.values])
        np.savetxt(path, data, delimiter=",",
                   header="cell_left,cell_right,value", comments="")


@dataclass(frozen=True, eq=False)
class MonotoneMap:
    """Piecewise-linear strictly increasing map with exact inversion."""

    t_knots: np.ndarray
    x_knots: np.ndarray

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        # linear extension with unit slope beyond the last knot
        inside = np.interp(t, self.t_knots, self.x_knots)
        beyond = self.x_knots[-1] + (t - self.t_knots[-1])
        return np.where(t <= self.t_knots[-1], inside, beyond)

    def inverse(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = np.interp(x, self.x_knots, self.t_knots)
        beyond = self.t_knots[-1] + (x - self.x_knots[-1])
        return np.where(x <= self.x_knots[-1], inside, beyond)


def partition_edges(T: float, h: float) -> np.ndarray:
    """Edges 0, h, 2h, ..., Nh, T with N = ceil(T/h) - 1."""
    if h <= 0 or h >= T:
        raise ValueError(f"step h must lie in (0, T); got h={h}, T={T}")
    N = int(np.ceil(T / h - 1e-12)) - 1
    edges = h * np.arange(N + 1)
    return np.append(edges, T)


def discrete_derivative(estimate: VolumeEstimate, h: float) -> DerivativeCurve:
    """Difference quotient on the three-branch partition.

    The estimate must contain every partition edge among its radii.  Note
    the last cell [Nh, T) still divides by h even though its width T - Nh
    may be shorter.
    """
    radii = np.asarray(estimate.radii, dtype=float)
    # T is the largest partition edge; the estimate's radii must include it
    T = float(np.max(radii))
    edges = partition_edges(T, h)
    tol = 1e-9 * max(1.0, T)
    s_at = {}
    for e in edges:
        hits = np.nonzero(np.abs(radii - e) <= tol)[0]
        if hits.size == 0:
            raise ValueError(
                f"volume estimate is missing the partition endpoint r={e}")
        s_at[float(e)] = float(estimate.values[hits[0]])
    values = np.empty(len(edges) - 1)
    values[0] = s_at[float(edges[1])] / h
    for j in range(1, len(edges) - 2):
        values[j] = (s_at[float(edges[j + 1])] - s_at[float(edges[j])]) / h
    if len(edges) >= 3:
        values[-1] = (s_at[float(edges[-1])] - s_at[float(edges[-2])]) / h
    return DerivativeCurve(edges=edges, values=values, h=h)


def clamp_reciprocal(k: DerivativeCurve, C0: float, C1: float) -> SpeedEstimate:
    """Reciprocal with clamped input: slopes below 1/C1 (resp. above 1/C0)
    are treated as exactly 1/C1 (resp. 1/C0) before inverting."""
    k_vals = k.values
    out = np.empty_like(k_vals)
    lo, hi = 1.0 / C1, 1.0 / C0
    out[k_vals < lo] = 1.0 / C1
    mid = (k_vals >= lo) & (k_vals <= hi)
    out[mid] = 1.0 / k_vals[mid]
    out[k_vals > hi] = 1.0 / C0
    return SpeedEstimate(edges=k.edges.copy(), values=out)


def clamp_speed(w: SpeedEstimate, C0: float, C1: float) -> SpeedEstimate:
    """Pointwise clamp into [C0, C1]; idempotent."""
    return SpeedEstimate(edges=w.edges.copy(),
                         values=np.clip(w.values, C0, C1))


def integrate_speed(w: SpeedEstimate) -> MonotoneMap:
    """Cumulative integral of the cellwise-constant speed (exact), extended
    past T with unit slope.  Requires positive values (post-clamp)."""
    if np.any(w.values <= 0):
        raise ValueError("speed values must be positive before integration")
    widths = np.diff(w.edges)
    x = np.concatenate([[0.0], np.cumsum(widths * w.values)])
    return MonotoneMap(t_knots=w.edges.copy(), x_knots=x)


def pullback(w: SpeedEstimate, chi: MonotoneMap, L: float,
             grid: SpaceGrid) -> np.ndarray:
    """Speed in the original coordinate: c(x) = w(chi^{-1}(x)) on [0, L),
    and identically 1 from L on."""
    x = grid.nodes
    values = np.asarray(w(chi.inverse(x)), dtype=float)
    values[x >= L] = 1.0
    return values
