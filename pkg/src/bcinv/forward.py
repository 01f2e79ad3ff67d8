"""Leapfrog solver for the Neumann problem and the discrete NtD operator.

The boundary flux f is the outward conormal derivative at x = 0, i.e. the
solver imposes du/dx(t, 0) = -f(t) through a ghost node.  With this
orientation a positive flux pushes the solution positive and, for c == 1,
the boundary trace of the response to f is t |-> int_0^t f, the closed form
the operator identities in :mod:`bcinv.operators` are built on.

The spatial domain [0, x_max] truncates the half axis; by finite speed of
propagation the truncation is exact (up to roundoff) as long as
x_max >= c_max * 2T plus a two-cell margin, which every constructor here
enforces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .grids import GridFunction, SpaceGrid, TimeGrid, make_space_grid
from .velocity import VelocityProfile

__all__ = [
    "WaveField",
    "NtdMatrix",
    "DEFAULT_CFL",
    "space_grid_for",
    "solve_forward",
    "boundary_trace",
    "final_snapshot",
    "assemble_ntd",
    "apply_ntd",
    "save_ntd",
    "load_ntd",
    "ntd_to_csv",
]

DEFAULT_CFL = 0.9
MARGIN_CELLS = 2


@dataclass(frozen=True, eq=False)
class WaveField:
    """Full space-time solution u with shape (n_t + 1, n_x + 1)."""

    time_grid: TimeGrid
    space_grid: SpaceGrid
    u: np.ndarray


@dataclass(frozen=True, eq=False)
class NtdMatrix:
    """Dense NtD matrix in the nodal convention.

    Column k holds the boundary trace of the solution driven by the k-th
    hat basis function; applying the matrix to nodal samples of f
    reproduces the trace of the solve driven by f (the solver is linear in
    the nodal values, so this is exact up to roundoff).
    """

    time_grid: TimeGrid
    matrix: np.ndarray
    convention: str = "nodal"

    def __post_init__(self):
        n = self.time_grid.n_nodes
        if self.matrix.shape != (n, n):
            raise ValueError(f"NtD matrix must be {n}x{n}, got {self.matrix.shape}")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("NtD matrix contains non-finite entries")


def space_grid_for(time_grid: TimeGrid, c_max: float,
                   cfl: float = DEFAULT_CFL, margin_cells: int = 4) -> SpaceGrid:
    """Space grid satisfying both the CFL bound and the no-reflection margin.

    dx is the smallest spacing with c_max * dt / dx <= cfl, rounded so that
    x_max = c_max * 2T + margin is an exact multiple of dx.
    """
    dx_min = c_max * time_grid.dt / cfl
    x_max = c_max * 2.0 * time_grid.T + margin_cells * dx_min
    n_x = int(np.floor(x_max / dx_min))
    return make_space_grid(x_max=x_max, n_x=n_x)


def _check_solver_grids(profile: VelocityProfile, time_grid: TimeGrid,
                        cfl: float) -> None:
    c_max = profile.c_max
    sgrid = profile.grid
    number = c_max * time_grid.dt / sgrid.dx
    if number > cfl + 1e-12:
        raise ValueError(
            f"CFL violation: c_max*dt/dx = {number:.4f} exceeds {cfl}")
    needed = c_max * 2.0 * time_grid.T + MARGIN_CELLS * sgrid.dx
    if sgrid.x_max < needed - 1e-12:
        raise ValueError(
            f"space grid too short: x_max={sgrid.x_max:.4f} < {needed:.4f}; "
            "waves would reach the artificial boundary before 2T")


def _leapfrog(profile: VelocityProfile, time_grid: TimeGrid, F: np.ndarray,
              keep_field: bool, snapshot_index: int | None):
    """Advance the scheme for all columns of F at once.

    F has shape (n_t + 1, n_cols): nodal flux samples per column.  Returns
    (traces, field_or_None, snapshot_or_None); traces has shape
    (n_t + 1, n_cols).
    """
    sgrid = profile.grid
    dt, dx = time_grid.dt, sgrid.dx
    n_t, n_x = time_grid.n_t, sgrid.n_x
    n_cols = F.shape[1]
    lam = (profile.values * dt / dx) ** 2  # squared Courant number per node

    if keep_field and n_cols != 1:
        raise ValueError("full fields are only kept for single-column solves")
    u_prev = np.zeros((n_cols, n_x + 1))
    u_curr = np.zeros((n_cols, n_x + 1))
    traces = np.zeros((n_t + 1, n_cols))
    field = np.zeros((n_t + 1, n_x + 1)) if keep_field else None
    snapshot = None

    # first step: Taylor start with zero initial data, only the flux acts
    u_curr[:, 0] = lam[0] * dx * F[0]
    traces[1] = u_curr[:, 0]
    if keep_field:
        field[1] = u_curr[0]
    if snapshot_index == 1:
        snapshot = u_curr.copy()

    for n in range(1, n_t):
        u_next = 2.0 * u_curr - u_prev
        u_next[:, 1:-1] += lam[1:-1] * (
            u_curr[:, 2:] - 2.0 * u_curr[:, 1:-1] + u_curr[:, :-2])
        u_next[:, 0] += lam[0] * (
            2.0 * u_curr[:, 1] - 2.0 * u_curr[:, 0] + 2.0 * dx * F[n])
        u_next[:, -1] += lam[-1] * (2.0 * u_curr[:, -2] - 2.0 * u_curr[:, -1])
        u_prev, u_curr = u_curr, u_next
        traces[n + 1] = u_curr[:, 0]
        if keep_field:
            field[n + 1] = u_curr[0]
        if snapshot_index is not None and n + 1 == snapshot_index:
            snapshot = u_curr.copy()

    return traces, field, snapshot


def solve_forward(profile: VelocityProfile, f: GridFunction,
                  cfl: float = DEFAULT_CFL) -> WaveField:
    """Solve the wave equation driven by the flux history f.

    Zero initial data; outward-conormal Neumann condition at x = 0 carrying
    f; homogeneous Neumann at x_max (never active thanks to the margin
    check).  Second order in dt and dx.
    """
    if not isinstance(f.grid, TimeGrid):
        raise ValueError("forcing must live on a time grid")
    _check_solver_grids(profile, f.grid, cfl)
    F = f.values[:, None]
    _, field, _ = _leapfrog(profile, f.grid, F, keep_field=True,
                            snapshot_index=None)
    return WaveField(time_grid=f.grid, space_grid=profile.grid, u=field)


def boundary_trace(field: WaveField) -> GridFunction:
    """u(t, 0): the Dirichlet trace the NtD operator returns."""
    return GridFunction(grid=field.time_grid, values=field.u[:, 0].copy())


def final_snapshot(field: WaveField) -> GridFunction:
    """u(T, x): the wave at the half-way time T."""
    return GridFunction(grid=field.space_grid,
                        values=field.u[field.time_grid.half_index].copy())


def solve_snapshots(profile: VelocityProfile, time_grid: TimeGrid,
                    F: np.ndarray, cfl: float = DEFAULT_CFL):
    """Traces and t = T snapshots for a batch of flux columns."""
    _check_solver_grids(profile, time_grid, cfl)
    traces, _, snapshot = _leapfrog(profile, time_grid, F, keep_field=False,
                                    snapshot_index=time_grid.half_index)
    return traces, snapshot


def assemble_ntd(profile: VelocityProfile, time_grid: TimeGrid,
                 cfl: float = DEFAULT_CFL) -> NtdMatrix:
    """Discrete NtD operator: one hat-function column per time node.

    All columns advance together in one batched solve, so the cost is a
    single (n_t x n_x) sweep over a matrix of n_t + 1 states.
    """
    _check_solver_grids(profile, time_grid, cfl)
    F = np.eye(time_grid.n_nodes)
    traces, _, _ = _leapfrog(profile, time_grid, F, keep_field=False,
                             snapshot_index=None)
    return NtdMatrix(time_grid=time_grid, matrix=traces)


def apply_ntd(ntd: NtdMatrix, f: GridFunction) -> GridFunction:
    """Matrix-vector product on nodal values."""
    return GridFunction(grid=ntd.time_grid, values=ntd.matrix @ f.values)


# ---------------------------------------------------------------------------
# serialization: one JSON header line, then raw row-major float64 (LE)

def save_ntd(ntd: NtdMatrix, path) -> None:
    header = {"n_t": ntd.time_grid.n_t, "T": ntd.time_grid.T,
              "convention": ntd.convention}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(ntd.matrix.astype("<f8").tobytes(order="C"))


def load_ntd(path) -> NtdMatrix:
    from .grids import make_time_grid

    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<f8")
    grid = make_time_grid(T=header["T"], n_t=header["n_t"])
    n = grid.n_nodes
    if data.size != n * n:
        raise ValueError(f"NtD payload has {data.size} entries, expected {n * n}")
    return NtdMatrix(time_grid=grid, matrix=data.reshape(n, n).copy(),
                     convention=header.get("convention", "nodal"))


def ntd_to_csv(ntd: NtdMatrix, path) -> None:
    """Plain CSV export, meant for small grids only."""
    np.savetxt(path, ntd.matrix, delimiter=",")
