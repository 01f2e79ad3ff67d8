"""Regularized control solves, the norm gate, and volume-curve estimation.

For each radius r the control f solves (H_r + alpha) f = Q_r B1 on the
active window; pairing it with the horizon ramp gives the volume estimate
s_alpha(r), which converges to the exact volume curve V(r) as alpha -> 0
on clean data.  The scalar gate psi switches the whole family off when the
norm of the shifted family indicates the inverse is no longer trustworthy
at the declared noise level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import GridFunction, TimeGrid
from .forward import NtdMatrix
from .operators import ConnectingOperator, RadiusFamily, connecting_operator, \
    horizon_ramp, radius_family

__all__ = [
    "GateConstants",
    "ControlSolve",
    "VolumeEstimate",
    "gate_value",
    "solve_control",
    "volume_estimate",
]


@dataclass(frozen=True)
class GateConstants:
    """Norm budget for the gate: m1 bounds ||Lambda||, m2 = 2T m1 bounds the
    windowed family, m3 = m2 + 3 is the shift that makes the inverse a
    contraction-series limit whenever the gate is open."""

    m1: float
    m2: float
    m3: float

    @classmethod
    def from_norm_bound(cls, m1: float, T: float) -> "GateConstants":
        if m1 <= 0:
            raise ValueError(f"norm bound m1 must be positive, got {m1}")
        m2 = 2.0 * T * m1
        return cls(m1=m1, m2=m2, m3=m2 + 3.0)


@dataclass(frozen=True, eq=False)
class ControlSolve:
    """One regularized control: the minimizer of
    <f, K f> - 2 <f, B1> + alpha ||f||^2 over sources in the window."""

    radius: float
    alpha: float
    control: GridFunction
    residual: float
    psi: float


@dataclass(frozen=True, eq=False)
class VolumeEstimate:
    """s_alpha over the sampled radii, with the gate value and per-radius
    solve residuals for auditing."""

    radii: np.ndarray
    values: np.ndarray
    psi: float
    residuals: np.ndarray
    alpha: float

    def to_csv(self, path) -> None:
        data = np.column_stack([
            self.radii, self.values,
            np.full_like(self.radii, self.psi), self.residuals,
        ])
        np.savetxt(path, data, delimiter=",",
                   header="r,s_alpha,psi,residual", comments="")


def _cutoff(s: float, alpha: float, m3: float) -> float:
    """Continuous 0/1 switch on the shifted-family norm."""
    if s <= m3 - 0.5 * alpha:
        return 1.0
    if s > m3 - 0.25 * alpha:
        return 0.0
    return -4.0 * s / alpha + 4.0 * m3 / alpha - 1.0


def _shifted_norm(family: RadiusFamily, r: float, alpha: float, m3: float,
                  rtol: float, maxiter: int) -> float:
    """|| (m3 - alpha) I - H_r || in the weighted product on the full grid.

    On the complement of the window the operator is (m3 - alpha) I, so the
    norm is the max of that scalar and the active-block norm.
    """
    from .harness import spectral_norm

    idx = family.indices(r)
    base = abs(m3 - alpha)
    if idx.size == 0:
        return base
    block = (m3 - alpha) * np.eye(idx.size) - family.block(r)
    w = family.time_grid.weights[idx]
    return max(base, spectral_norm(block, w, rtol=rtol, maxiter=maxiter))


def gate_value(family: RadiusFamily, alpha: float, gates: GateConstants,
               rtol: float = 1e-8, maxiter: int = 10_000):
    """psi = cutoff(sup_r ||(m3 - alpha) I - H_r||), evaluated once per
    (data, alpha) over the family's sampled radius set.

    Returns (psi, s).  Requires alpha in (0, 2].
    """
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"gate requires alpha in (0, 2], got {alpha}")
    s = max(_shifted_norm(family, r, alpha, gates.m3, rtol, maxiter)
            for r in family.radii)
    return _cutoff(s, alpha, gates.m3), s


def solve_control(family: RadiusFamily, r: float, alpha: float,
                  psi: float = 1.0) -> ControlSolve:
    """Direct dense solve of (H_r + alpha) f = Q_r B1 on the active window.

    The returned control is zero off the window; the stored residual is the
    weighted relative residual of the solved system.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    grid = family.time_grid
    idx = family.indices(r)
    full = np.zeros(grid.n_nodes)
    if idx.size == 0:
        return ControlSolve(radius=r, alpha=alpha,
                            control=GridFunction(grid, full),
                            residual=0.0, psi=psi)
    b = horizon_ramp(grid).values[idx]
    system = family.block(r) + alpha * np.eye(idx.size)
    try:
        x = np.linalg.solve(system, b)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(system)
        raise RuntimeError(
            f"control solve failed at r={r}, alpha={alpha} "
            f"(condition estimate {cond:.2e})") from exc
    if not np.all(np.isfinite(x)):
        raise RuntimeError(f"control solve returned non-finite values at r={r}")
    w = grid.weights[idx]
    res = np.sqrt(np.sum(w * (system @ x - b) ** 2))
    scale = np.sqrt(np.sum(w * b**2))
    full[idx] = x
    return ControlSolve(radius=r, alpha=alpha,
                        control=GridFunction(grid, full),
                        residual=float(res / scale) if scale > 0 else float(res),
                        psi=psi)


def volume_estimate(data: NtdMatrix | RadiusFamily, alpha: float, radii=None,
                    gates: GateConstants | None = None,
                    window: str = "late") -> VolumeEstimate:
    """s_alpha(r) = psi * <(H_r + alpha)^{-1} Q_r B1, B1> over the radii.

    Accepts either an NtD matrix (the family is built here) or a
    pre-built RadiusFamily.  The scalar gate multiplies the whole curve;
    when it is closed the estimate is identically zero.
    """
    if isinstance(data, RadiusFamily):
        family = data
        if radii is not None:
            raise ValueError("radii are fixed by the pre-built family")
    else:
        if radii is None:
            raise ValueError("radii are required when passing an NtD matrix")
        family = radius_family(connecting_operator(data), radii, window=window)

    grid = family.time_grid
    if gates is None:
        from .harness import spectral_norm
        gates = GateConstants.from_norm_bound(
            spectral_norm(data.matrix if isinstance(data, NtdMatrix) else family.K,
                          grid.weights) + alpha, grid.T)
    psi, _ = gate_value(family, alpha, gates)

    b1 = horizon_ramp(grid)
    values = np.zeros(len(family.radii))
    residuals = np.zeros(len(family.radii))
    if psi != 0.0:
        for i, r in enumerate(family.radii):
            solve = solve_control(family, r, alpha, psi=psi)
            residuals[i] = solve.residual
            values[i] = psi * float(
                np.sum(grid.weights * solve.control.values * b1.values))
    return VolumeEstimate(radii=family.radii.copy(), values=values, psi=psi,
                          residuals=residuals, alpha=alpha)
