"""Admissible velocity profiles, travel-time coordinates and volume curves.

A profile c(x) is admissible when C0 <= c <= C1, c - 1 is compactly
supported in (0, L), and the discrete C2 norm stays below the class bound m.
The travel-time change of variables tau(x) = int_0^x dt/c and its inverse
chi drive both the exact volume curves used as ground truth in tests and
the final coordinate pullback of the inversion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import GridFunction, SpaceGrid, make_space_grid

__all__ = [
    "VelocityProfile",
    "TravelTimeMap",
    "VolumeCurve",
    "validate_profile",
    "discrete_c2_norm",
    "travel_time",
    "volume_curve",
    "dv_norm",
    "bump_profile",
    "double_bump_profile",
    "ramp_profile",
    "constant_profile",
    "save_profile",
    "load_profile",
]


@dataclass(frozen=True, eq=False)
class VelocityProfile:
    """Sampled wave speed c(x) with its class constants."""

    grid: SpaceGrid
    values: np.ndarray
    C0: float
    C1: float
    L: float
    m: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise ValueError("profile samples do not match the grid")
        object.__setattr__(self, "values", values)

    @property
    def c_max(self) -> float:
        return float(np.max(self.values))


@dataclass(frozen=True, eq=False)
class TravelTimeMap:
    """Tables for tau(x) and the inverse coordinate chi(t).

    Both maps are strictly increasing; evaluation interpolates linearly,
    inversion is the same interpolation on the swapped table.
    """

    x_nodes: np.ndarray
    tau_values: np.ndarray

    def tau(self, x) -> np.ndarray:
        return np.interp(x, self.x_nodes, self.tau_values)

    def chi(self, t) -> np.ndarray:
        return np.interp(t, self.tau_values, self.x_nodes)


@dataclass(frozen=True, eq=False)
class VolumeCurve:
    """V(r): the c^-2 dx volume of the domain of influence [0, chi(r)]."""

    radii: np.ndarray
    values: np.ndarray

    def __call__(self, r) -> np.ndarray:
        return np.interp(r, self.radii, self.values)


def _derivatives(values: np.ndarray, dx: float):
    """First and second differences, centered inside, one-sided at the ends."""
    d1 = np.gradient(values, dx, edge_order=2)
    d2 = np.empty_like(values)
    d2[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / dx**2
    d2[0] = (values[0] - 2.0 * values[1] + values[2]) / dx**2
    d2[-1] = (values[-1] - 2.0 * values[-2] + values[-3]) / dx**2
    return d1, d2


def discrete_c2_norm(values: np.ndarray, dx: float) -> float:
    d1, d2 = _derivatives(np.asarray(values, dtype=float), dx)
    return float(max(np.max(np.abs(values)), np.max(np.abs(d1)), np.max(np.abs(d2))))


def validate_profile(profile: VelocityProfile) -> list:
    """Return the list of class violations; empty means admissible."""
    violations = []
    c = profile.values
    grid = profile.grid
    tol = 1e-12 * max(1.0, profile.C1)
    if np.any(c < profile.C0 - tol):
        violations.append("lower bound: some samples fall below C0")
    if np.any(c > profile.C1 + tol):
        violations.append("upper bound: some samples exceed C1")
    if abs(c[0] - 1.0) > tol:
        violations.append("support: c(0) must equal 1")
    outside = grid.nodes >= profile.L - 1e-12 * profile.L
    if np.any(np.abs(c[outside] - 1.0) > tol):
        violations.append("support: c must equal 1 for x >= L")
    if discrete_c2_norm(c, grid.dx) > profile.m + 1e-9 * profile.m:
        violations.append("smoothness: discrete C2 norm exceeds m")
    return violations


def travel_time(profile: VelocityProfile) -> TravelTimeMap:
    """tau by cumulative trapezoid of 1/c; chi by monotone table inversion."""
    slowness = 1.0 / profile.values
    dx = profile.grid.dx
    tau = np.concatenate([[0.0], np.cumsum(0.5 * dx * (slowness[1:] + slowness[:-1]))])
    return TravelTimeMap(x_nodes=profile.grid.nodes, tau_values=tau)


def _cumulative_trapezoid(values: np.ndarray, dx: float) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(0.5 * dx * (values[1:] + values[:-1]))])


def volume_curve(profile: VelocityProfile, radii, T: float | None = None) -> VolumeCurve:
    """V(r) = int_0^{chi(r)} c(x)^-2 dx evaluated by quadrature.

    Radii must lie inside [0, T]; with T omitted the only constraint is
    that chi(r) stays on the space grid.
    """
    radii = np.asarray(radii, dtype=float)
    if T is not None and (np.any(radii < 0) or np.any(radii > T + 1e-12 * T)):
        raise ValueError(f"radii must lie in [0, {T}]")
    ttm = travel_time(profile)
    if np.any(radii > ttm.tau_values[-1]):
        raise ValueError("radius exceeds the travel time of the space grid")
    cumulative = _cumulative_trapezoid(profile.values**-2, profile.grid.dx)
    chi_r = ttm.chi(radii)
    values = np.interp(chi_r, profile.grid.nodes, cumulative)
    return VolumeCurve(radii=radii, values=values)


def dv_norm(p: GridFunction, profile: VelocityProfile) -> float:
    """Norm of p in the c^-2 dx weighted product on the space grid."""
    if p.grid is not profile.grid and not np.allclose(p.grid.nodes, profile.grid.nodes):
        raise ValueError("grid mismatch between function and profile")
    w = profile.grid.weights
    return float(np.sqrt(np.sum(w * p.values**2 / profile.values**2)))


# ---------------------------------------------------------------------------
# profile generators: closed forms sampled onto a grid, class constants
# attached (m estimated from the samples with headroom unless given)

def _finish(grid, values, C0, C1, L, m):
    if m is None:
        m = 1.25 * discrete_c2_norm(values, grid.dx)
    return VelocityProfile(grid=grid, values=values, C0=C0, C1=C1, L=L, m=m)


def constant_profile(grid: SpaceGrid, value: float = 1.0, C0: float = 0.9,
                     C1: float = 1.4, L: float = 1.0, m: float | None = None) -> VelocityProfile:
    return _finish(grid, np.full(grid.n_nodes, float(value)), C0, C1, L, m)


def bump_profile(grid: SpaceGrid, amplitude: float = 0.3, x0: float = 0.25,
                 width: float = 0.5, C0: float = 0.9, C1: float = 1.4,
                 L: float = 1.0, m: float | None = None) -> VelocityProfile:
    """c = 1 + amplitude * sin^2(pi (x - x0) / width) inside (x0, x0 + width)."""
    x = grid.nodes
    values = np.ones(grid.n_nodes)
    inside = (x > x0) & (x < x0 + width)
    values[inside] += amplitude * np.sin(np.pi * (x[inside] - x0) / width) ** 2
    return _finish(grid, values, C0, C1, L, m)


def double_bump_profile(grid: SpaceGrid, amplitudes=(0.25, -0.15),
                        windows=((0.1, 0.4), (0.55, 0.85)), C0: float = 0.8,
                        C1: float = 1.3, L: float = 1.0,
                        m: float | None = None) -> VelocityProfile:
    x = grid.nodes
    values = np.ones(grid.n_nodes)
    for amp, (a, b) in zip(amplitudes, windows):
        inside = (x > a) & (x < b)
        values[inside] += amp * np.sin(np.pi * (x[inside] - a) / (b - a)) ** 2
    return _finish(grid, values, C0, C1, L, m)


def ramp_profile(grid: SpaceGrid, amplitude: float = 0.25, x0: float = 0.15,
                 rise: float = 0.2, plateau: float = 0.3, C0: float = 0.9,
                 C1: float = 1.4, L: float = 1.0, m: float | None = None) -> VelocityProfile:
    """Quintic smoothstep up to a plateau and back down; C2 at the joints."""
    def smoothstep(u):
        u = np.clip(u, 0.0, 1.0)
        return u**3 * (6.0 * u**2 - 15.0 * u + 10.0)

    x = grid.nodes
    up = smoothstep((x - x0) / rise)
    down = smoothstep((x0 + rise + plateau + rise - x) / rise)
    values = 1.0 + amplitude * np.minimum(up, down)
    return _finish(grid, values, C0, C1, L, m)


# ---------------------------------------------------------------------------
# file format: CSV (x, c) plus a JSON sidecar with the class constants

def save_profile(profile: VelocityProfile, csv_path, T: float | None = None) -> None:
    csv_path = Path(csv_path)
    data = np.column_stack([profile.grid.nodes, profile.values])
    np.savetxt(csv_path, data, delimiter=",", header="x,c", comments="")
    meta = {"C0": profile.C0, "C1": profile.C1, "L": profile.L, "m": profile.m}
    if T is not None:
        meta["T"] = T
    csv_path.with_suffix(".json").write_text(json.dumps(meta, indent=2))


def load_profile(csv_path) -> VelocityProfile:
    csv_path = Path(csv_path)
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    x, c = data[:, 0], data[:, 1]
    n_x = len(x) - 1
    grid = make_space_grid(x_max=float(x[-1]), n_x=n_x)
    if not np.allclose(grid.nodes, x):
        raise ValueError("profile file is not sampled on a uniform grid")
    return VelocityProfile(grid=grid, values=c, C0=meta["C0"], C1=meta["C1"],
                           L=meta["L"], m=meta["m"])
