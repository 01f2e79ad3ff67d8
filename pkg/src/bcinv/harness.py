"""Noise synthesis, spectral norms, error metrics, and convergence studies.

Every random quantity flows from an explicit seed, so all studies are
reproducible bit for bit.  Envelope constants are fitted at the largest
swept parameter value (one-sided worst case), never by least squares: the
rates under test are upper bounds, not asymptotic equalities.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .grids import GridFunction, TimeGrid
from .forward import NtdMatrix, assemble_ntd
from .velocity import VelocityProfile, volume_curve

__all__ = [
    "NoiseSpec",
    "StudyReport",
    "make_noise",
    "spectral_norm",
    "sup_error",
    "run_noise_study",
    "run_alpha_study",
    "fit_envelope",
    "loglog_slope",
]

NOISE_RATE = 1.0 / 18.0     # reconstruction error envelope exponent in eps
VOLUME_RATE = 0.25          # volume-curve envelope exponent in alpha


@dataclass(frozen=True)
class NoiseSpec:
    """Target operator-norm bound, seed, and the fraction of the bound to
    actually spend."""

    epsilon: float
    seed: int
    fill: float = 1.0
    kind: str = "gaussian"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("noise bound must be non-negative")
        if not 0.0 <= self.fill <= 1.0:
            raise ValueError(f"fill fraction must be in [0, 1], got {self.fill}")
        if self.kind not in ("gaussian", "lowrank", "causal"):
            raise ValueError(f"unknown noise kind: {self.kind!r}")


def spectral_norm(A: np.ndarray, weights: np.ndarray, rtol: float = 1e-8,
                  maxiter: int = 10_000) -> float:
    """Weighted operator norm by power iteration on the normal operator.

    Equivalent to the largest singular value of W^(1/2) A W^(-1/2); the
    iteration runs on the symmetric PSD matrix M^T M with a fixed seeded
    start vector.  Raises RuntimeError with a gap estimate when the
    Rayleigh quotient has not stabilized within ``maxiter`` iterations.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix must be square, got {A.shape}")
    if n == 0:
        return 0.0
    sq = np.sqrt(weights)
    M = sq[:, None] * A / sq[None, :]
    x = np.sin(1.0 + np.arange(n))      # fixed, generic start vector
    x /= np.linalg.norm(x)
    prev = 0.0
    for _ in range(maxiter):
        y = M.T @ (M @ x)
        sigma_sq = float(x @ y)
        ynorm = np.linalg.norm(y)
        if ynorm == 0.0:
            return 0.0
        x = y / ynorm
        if abs(sigma_sq - prev) <= rtol * max(sigma_sq, 1e-300):
            return float(np.sqrt(sigma_sq))
        prev = sigma_sq
    raise RuntimeError(
        "power iteration did not converge: last relative increment "
        f"{abs(sigma_sq - prev) / max(sigma_sq, 1e-300):.2e} after {maxiter} "
        "iterations (spectral gap too small)")


def make_noise(grid: TimeGrid, spec: NoiseSpec) -> np.ndarray:
    """Dense perturbation with weighted spectral norm fill * epsilon.

    Gaussian entries rescaled to the exact target norm; "lowrank" uses a
    random rank-3 outer product and "causal" zeroes everything on or above
    the diagonal so the perturbation respects the data's causality.
    """
    n = grid.n_nodes
    target = spec.fill * spec.epsilon
    if target == 0.0:
        return np.zeros((n, n))
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussian":
        E = rng.standard_normal((n, n))
    elif spec.kind == "lowrank":
        U = rng.standard_normal((n, 3))
        V = rng.standard_normal((n, 3))
        E = U @ V.T
    else:  # causal
        E = np.tril(rng.standard_normal((n, n)), k=-1)
    return E * (target / spectral_norm(E, grid.weights))


def sup_error(c_tilde: GridFunction, c: GridFunction) -> float:
    """Max nodal deviation over the whole space grid."""
    if c_tilde.grid is not c.grid and not np.allclose(
            c_tilde.grid.nodes, c.grid.nodes):
        raise ValueError("profiles live on different grids")
    return float(np.max(np.abs(c_tilde.values - c.values)))


def fit_envelope(params: np.ndarray, errors: np.ndarray, rate: float) -> float:
    """C such that error <= C * param^rate, pinned at the largest parameter."""
    params = np.asarray(params, dtype=float)
    errors = np.asarray(errors, dtype=float)
    i = int(np.argmax(params))
    return float(errors[i] / params[i] ** rate)


def loglog_slope(params, errors) -> float:
    coeffs = np.polyfit(np.log(np.asarray(params, dtype=float)),
                        np.log(np.maximum(np.asarray(errors, dtype=float),
                                          1e-300)), 1)
    return float(coeffs[0])


@dataclass(eq=False)
class StudyReport:
    """Rows of a one-parameter sweep plus fit diagnostics.

    Runtimes are kept out of the CSV payload on purpose: study outputs must
    be byte-identical across reruns with the same config.
    """

    parameter: str
    columns: list
    rows: list
    envelope_constant: float
    envelope_rate: float
    slope: float
    passed: bool
    notes: list = field(default_factory=list)
    runtimes: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(_format_cell(v) for v in row) + "\n")

    def meta(self) -> dict:
        return {
            "parameter": self.parameter,
            "envelope_constant": self.envelope_constant,
            "envelope_rate": self.envelope_rate,
            "loglog_slope": self.slope,
            "passed": self.passed,
            "notes": self.notes,
            "runtimes_s": self.runtimes,
        }


def _format_cell(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def run_noise_study(profile: VelocityProfile, epsilons, seeds, config,
                    monotone_slack: float = 1.1) -> StudyReport:
    """Reconstruct under seeded noise across the epsilon sweep.

    For each (epsilon, seed): synthesize data, perturb to the exact norm,
    reconstruct and record the sup error.  The envelope constant is fitted
    at the largest epsilon; the study passes when every row sits under the
    envelope and each seed's errors are non-increasing in epsilon within
    the multiplicative slack.
    """
    from .regularize import reconstruct

    tgrid = config.time_grid()
    ntd = assemble_ntd(profile, tgrid, cfl=config.cfl)
    truth = GridFunction(profile.grid, profile.values.copy())

    epsilons = sorted(float(e) for e in epsilons)
    rows = []
    runtimes = []
    notes = []
    errors = {}
    for eps in epsilons:
        for seed in seeds:
            t0 = time.perf_counter()
            spec = NoiseSpec(epsilon=eps, seed=int(seed),
                             fill=config.noise_fill, kind=config.noise_kind)
            noisy = NtdMatrix(time_grid=tgrid,
                              matrix=ntd.matrix + make_noise(tgrid, spec))
            try:
                result = reconstruct(noisy, eps, config.constants,
                                     space_grid=profile.grid,
                                     projector=config.projector,
                                     h_policy=config.h_policy,
                                     m1_override=config.M1_override)
                err = sup_error(result.c_tilde, truth)
                status = "ok"
                psi = result.psi
            except ValueError as exc:
                err, psi, status = float("nan"), float("nan"), f"rejected: {exc}"
                notes.append(f"eps={eps} seed={seed} {status}")
            rows.append([eps, int(seed), err, psi, status])
            errors[(eps, int(seed))] = err
            runtimes.append(time.perf_counter() - t0)

    ok_eps = [e for e in epsilons
              if all(np.isfinite(errors[(e, int(s))]) for s in seeds)]
    per_eps_max = np.array([max(errors[(e, int(s))] for s in seeds)
                            for e in ok_eps])
    constant = fit_envelope(np.array(ok_eps), per_eps_max, NOISE_RATE) \
        if ok_eps else float("nan")

    passed = bool(ok_eps)
    for e, emax in zip(ok_eps, per_eps_max):
        if emax > constant * e ** NOISE_RATE * (1.0 + 1e-12):
            passed = False
            notes.append(f"envelope violated at eps={e}")
    for seed in seeds:
        seq = [errors[(e, int(seed))] for e in ok_eps]
        for lo, hi in zip(seq[:-1], seq[1:]):
            # epsilons ascend: the error at the smaller eps must not exceed
            # the larger-eps error by more than the slack
            if lo > monotone_slack * hi:
                passed = False
                notes.append(f"seed {seed}: error not monotone within slack")
                break

    per_eps_mean = [float(np.mean([errors[(e, int(s))] for s in seeds]))
                    for e in ok_eps]
    slope = loglog_slope(ok_eps, per_eps_mean) if len(ok_eps) >= 2 else float("nan")
    return StudyReport(parameter="epsilon",
                       columns=["epsilon", "seed", "sup_error", "psi", "status"],
                       rows=rows, envelope_constant=constant,
                       envelope_rate=NOISE_RATE, slope=slope, passed=passed,
                       notes=notes, runtimes=runtimes)


def run_alpha_study(profile: VelocityProfile, alphas, config,
                    n_radii: int = 33, monotone_slack: float = 1.1,
                    floor: float = 0.0) -> StudyReport:
    """Sweep alpha on noiseless data and compare s_alpha with the exact
    volume curve in the sup norm over the sampled radii."""
    from .control import GateConstants, volume_estimate
    from .operators import connecting_operator, radius_family

    tgrid = config.time_grid()
    ntd = assemble_ntd(profile, tgrid, cfl=config.cfl)
    stride = max(1, tgrid.half_index // (n_radii - 1))
    radii = tgrid.dt * np.arange(0, tgrid.half_index + 1, stride)
    if radii[-1] < tgrid.T - 1e-12:
        radii = np.append(radii, tgrid.T)
    exact = volume_curve(profile, radii, T=tgrid.T)

    family = radius_family(connecting_operator(ntd), radii,
                           window=config.projector)
    m1 = config.M1_override or (spectral_norm(ntd.matrix, tgrid.weights)
                                + max(alphas))
    gates = GateConstants.from_norm_bound(m1, tgrid.T)

    alphas = sorted(float(a) for a in alphas)
    rows = []
    runtimes = []
    errors = []
    for alpha in alphas:
        t0 = time.perf_counter()
        est = volume_estimate(family, alpha, gates=gates)
        err = float(np.max(np.abs(est.values - exact.values)))
        errors.append(err)
        rows.append([alpha, err, est.psi, float(np.max(est.residuals))])
        runtimes.append(time.perf_counter() - t0)

    constant = fit_envelope(np.array(alphas), np.array(errors), VOLUME_RATE)
    passed = True
    notes = []
    for a, err in zip(alphas, errors):
        if err > constant * a ** VOLUME_RATE + floor:
            passed = False
            notes.append(f"envelope violated at alpha={a}")
    for small, large in zip(errors[:-1], errors[1:]):
        if small > monotone_slack * large + floor:
            passed = False
            notes.append("error increased while alpha decreased")
            break

    slope = loglog_slope(alphas, errors)
    return StudyReport(parameter="alpha",
                       columns=["alpha", "sup_error", "psi", "max_residual"],
                       rows=rows, envelope_constant=constant,
                       envelope_rate=VOLUME_RATE, slope=slope, passed=passed,
                       notes=notes, runtimes=runtimes)
