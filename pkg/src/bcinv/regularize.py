"""Noise-indexed parameter schedules and the composed reconstruction map.

Given boundary data with declared operator-norm noise level epsilon, the
strategy fixes alpha(eps) = 2^(13/9) T^(4/9) eps^(4/9) and a difference
step h(eps), then runs

    windowed family -> gate -> volume estimate -> difference quotient
    -> reciprocal clamp -> range clamp -> integrate -> pullback

returning the reconstructed speed along with every intermediate curve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grids import GridFunction, SpaceGrid, TimeGrid, make_time_grid
from .forward import NtdMatrix, space_grid_for
from .operators import connecting_operator, radius_family
from .control import GateConstants, VolumeEstimate, volume_estimate
from .postprocess import (DerivativeCurve, MonotoneMap, SpeedEstimate,
                          clamp_reciprocal, clamp_speed, discrete_derivative,
                          integrate_speed, partition_edges, pullback)

__all__ = [
    "Schedule",
    "ClassConstants",
    "ReconstructionResult",
    "alpha_of_epsilon",
    "epsilon_zero",
    "h_of_epsilon",
    "make_schedule",
    "reconstruct",
    "write_result_bundle",
    "PipelineConfig",
]

P_EXPONENT = 4.0 / 9.0


@dataclass(frozen=True)
class ClassConstants:
    """Declared model-class constants the inversion is allowed to use."""

    C0: float
    C1: float
    L: float

    def __post_init__(self):
        if not 0 < self.C0 <= self.C1:
            raise ValueError(f"need 0 < C0 <= C1, got {self.C0}, {self.C1}")
        if self.L <= 0:
            raise ValueError(f"support length L must be positive, got {self.L}")


@dataclass(frozen=True)
class Schedule:
    """Parameter choices derived from the declared noise level."""

    epsilon: float
    alpha: float
    h_raw: float
    h: float
    T: float
    p: float = P_EXPONENT
    policy: str = "default"

    def as_dict(self) -> dict:
        return {"epsilon": self.epsilon, "alpha": self.alpha,
                "h_raw": self.h_raw, "h": self.h, "T": self.T,
                "p": self.p, "policy": self.policy}


def alpha_of_epsilon(epsilon: float, T: float) -> float:
    """alpha(eps) = 2^(13/9) T^(4/9) eps^(4/9)."""
    if epsilon <= 0:
        raise ValueError(f"noise level must be positive, got {epsilon}")
    return 2.0 ** (13.0 / 9.0) * T ** (4.0 / 9.0) * epsilon ** (4.0 / 9.0)


def epsilon_zero(T: float, C1: float) -> float:
    """Admissibility threshold; the travel-time extent chi(T) is replaced by
    its worst-case bound C1 * T, which only tightens the threshold."""
    if T <= 0 or C1 <= 0:
        raise ValueError("T and C1 must be positive")
    chi_bound = C1 * T
    base = 2.0 ** (13.0 / 4.0) * T**9
    return min(1.0, 1.0 / (2.0 * T), 1.0 / base, 1.0 / (base * chi_bound ** 4.5))


def h_of_epsilon(epsilon: float, T: float, dt: float,
                 policy: str = "default") -> tuple[float, float]:
    """Difference step for the declared noise level, snapped up to a
    multiple of dt.  Returns (h_raw, h_snapped).

    "default" uses h = (2 T eps)^(1/2): the volume estimate inherits a
    2T-amplified data error, and the quotient step is its square root.
    "proof-faithful" uses the square root of the full internally propagated
    perturbation level instead.
    """
    if policy == "default":
        h_raw = np.sqrt(2.0 * T * epsilon)
    elif policy == "proof-faithful":
        p = P_EXPONENT
        eps2 = (2.0 ** (-2.0 * p) / 3.0) * T ** (4.0 - 2.0 * p) \
            * epsilon ** (1.0 - 2.0 * p)
        h_raw = np.sqrt(eps2)
    else:
        raise ValueError(f"unknown h policy: {policy!r}")
    h = dt * int(np.ceil(h_raw / dt - 1e-12))
    h = max(h, dt)
    if h >= T:
        raise ValueError(
            f"difference step h={h} reaches the horizon T={T}; "
            "the noise level is too large for this time grid")
    return float(h_raw), float(h)


def make_schedule(epsilon: float, T: float, dt: float,
                  policy: str = "default") -> Schedule:
    alpha = alpha_of_epsilon(epsilon, T)
    if alpha > 2.0:
        raise ValueError(
            f"alpha({epsilon}) = {alpha:.4f} exceeds the gate bound 2; "
            "the noise level is not admissible")
    h_raw, h = h_of_epsilon(epsilon, T, dt, policy)
    return Schedule(epsilon=epsilon, alpha=alpha, h_raw=h_raw, h=h, T=T,
                    policy=policy)


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    """Reconstructed speed plus every intermediate curve for auditing."""

    space_grid: SpaceGrid
    c_values: np.ndarray
    volume: VolumeEstimate
    derivative: DerivativeCurve
    speed_raw: SpeedEstimate
    speed: SpeedEstimate
    chi: MonotoneMap
    schedule: Schedule
    psi: float
    m1: float

    @property
    def c_tilde(self) -> GridFunction:
        return GridFunction(grid=self.space_grid, values=self.c_values.copy())


def reconstruct(ntd: NtdMatrix, epsilon: float, constants: ClassConstants,
                space_grid: SpaceGrid | None = None, projector: str = "late",
                h_policy: str = "default",
                m1_override: float | None = None) -> ReconstructionResult:
    """Run the full regularized inversion on (possibly noisy) NtD data.

    Parameters
    ----------
    ntd : NtdMatrix
        Measured or synthesized boundary data on the time grid.
    epsilon : float
        Declared operator-norm bound on the data error; must lie in
        (0, epsilon_zero(T, C1)).
    constants : ClassConstants
        Declared class bounds (C0, C1, L) of the unknown profile.
    space_grid : SpaceGrid, optional
        Where to sample the reconstruction; defaults to the solver policy
        grid for the class bound C1.
    projector : {"late", "early"}
        Control-window convention of the restriction projectors.
    h_policy : {"default", "proof-faithful"}
        Difference-step schedule.
    m1_override : float, optional
        Declared bound for the noiseless data norm; the default is the
        measured norm of the given data plus epsilon.
    """
    grid = ntd.time_grid
    T = grid.T
    eps0 = epsilon_zero(T, constants.C1)
    if not 0.0 < epsilon < eps0:
        raise ValueError(
            f"noise level {epsilon} is not admissible: needs 0 < epsilon < "
            f"epsilon_0 = {eps0:.6g} for T={T}, C1={constants.C1}")
    schedule = make_schedule(epsilon, T, grid.dt, policy=h_policy)

    if space_grid is None:
        space_grid = space_grid_for(grid, c_max=constants.C1)

    radii = partition_edges(T, schedule.h)
    family = radius_family(connecting_operator(ntd), radii, window=projector)

    if m1_override is not None:
        m1 = float(m1_override)
    else:
        from .harness import spectral_norm
        m1 = spectral_norm(ntd.matrix, grid.weights) + epsilon
    gates = GateConstants.from_norm_bound(m1, T)

    estimate = volume_estimate(family, schedule.alpha, gates=gates)
    derivative = discrete_derivative(estimate, schedule.h)
    speed_raw = clamp_reciprocal(derivative, constants.C0, constants.C1)
    speed = clamp_speed(speed_raw, constants.C0, constants.C1)
    chi = integrate_speed(speed)
    c_values = pullback(speed, chi, constants.L, space_grid)

    return ReconstructionResult(space_grid=space_grid, c_values=c_values,
                                volume=estimate, derivative=derivative,
                                speed_raw=speed_raw, speed=speed, chi=chi,
                                schedule=schedule, psi=estimate.psi, m1=m1)


def write_result_bundle(result: ReconstructionResult, out_dir) -> None:
    """Result bundle: c_tilde.csv, stages/*.csv and meta.json."""
    out = Path(out_dir)
    stages = out / "stages"
    stages.mkdir(parents=True, exist_ok=True)

    result.c_tilde.to_csv(out / "c_tilde.csv")
    result.volume.to_csv(stages / "s_alpha.csv")
    np.savetxt(stages / "derivative.csv",
               np.column_stack([result.derivative.edges[:-1],
                                result.derivative.edges[1:],
                                result.derivative.values]),
               delimiter=",", header="cell_left,cell_right,value", comments="")
    result.speed_raw.to_csv(stages / "speed_raw.csv")
    result.speed.to_csv(stages / "speed.csv")
    np.savetxt(stages / "chi.csv",
               np.column_stack([result.chi.t_knots, result.chi.x_knots]),
               delimiter=",", header="t,chi", comments="")
    meta = {
        "schedule": result.schedule.as_dict(),
        "psi": result.psi,
        "m1": result.m1,
        "max_residual": float(np.max(result.volume.residuals)),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2))


@dataclass
class PipelineConfig:
    """JSON-backed configuration shared by the command line tools."""

    T: float = 1.25
    C0: float = 0.9
    C1: float = 1.4
    L: float = 1.0
    n_t: int = 512
    n_x: int | None = None
    epsilon: float = 1e-4
    seed: int = 1234
    projector: str = "late"
    h_policy: str = "default"
    M1_override: float | None = None
    cfl: float = 0.9
    profile: dict = field(default_factory=lambda: {"kind": "bump"})
    noise_kind: str = "gaussian"
    noise_fill: float = 1.0

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        raw = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_json(self, path) -> None:
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        Path(path).write_text(json.dumps(data, indent=2))

    @property
    def constants(self) -> ClassConstants:
        return ClassConstants(C0=self.C0, C1=self.C1, L=self.L)

    def time_grid(self) -> TimeGrid:
        grid = make_time_grid(self.T, self.n_t)
        # the shipped schedule must respect the gate bound for this horizon
        assert alpha_of_epsilon(epsilon_zero(self.T, self.C1), self.T) <= 2.0
        return grid

    def build_profile(self):
        from . import velocity

        kind = self.profile.get("kind", "bump")
        params = {k: v for k, v in self.profile.items() if k != "kind"}
        grid = self.space_grid()
        makers = {
            "bump": velocity.bump_profile,
            "double_bump": velocity.double_bump_profile,
            "ramp": velocity.ramp_profile,
            "constant": velocity.constant_profile,
        }
        if kind not in makers:
            raise ValueError(f"unknown profile kind: {kind!r}")
        params.setdefault("C0", self.C0)
        params.setdefault("C1", self.C1)
        params.setdefault("L", self.L)
        return makers[kind](grid, **params)

    def space_grid(self) -> SpaceGrid:
        from .grids import make_space_grid

        tgrid = make_time_grid(self.T, self.n_t)
        if self.n_x is not None:
            x_max = self.C1 * 2.0 * self.T + 4.0 * self.C1 * tgrid.dt / self.cfl
            return make_space_grid(x_max=x_max, n_x=self.n_x)
        return space_grid_for(tgrid, c_max=self.C1, cfl=self.cfl)
