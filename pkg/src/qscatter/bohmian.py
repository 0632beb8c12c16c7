"""Bohmian velocity fields, closed-form Gaussian paths and trajectory ensembles."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import NodeProximity, StiffnessFailure
from .model import (SCALED, Family, PacketParams, WaveField, complex_width,
                    free_gaussian, free_gaussian_log_derivative,
                    group_velocity, interacting_nonreflecting,
                    interacting_nonreflecting_log_derivative)
from .numerics import OdeSpec, Trajectory, ode_integrate
from .observables import _window, cdf, f3

RHO_FLOOR = 1e-12
DECILES = tuple(round(0.1 * i, 1) for i in range(1, 10))

__all__ = [
    "DECILES", "EnsembleSpec", "RHO_FLOOR", "Trajectory", "crossing_free", "free_gaussian_velocity",
    "gaussian_trajectory", "initial_velocity_nr", "launch_positions", "run_ensemble",
    "quantile_drift", "trajectory_from", "velocity", "worker_count",
]


@dataclass(frozen=True)
class EnsembleSpec:
    quantiles: tuple[float, ...] = DECILES
    t_final: float = 20.0
    ode: OdeSpec = field(default_factory=OdeSpec)
    cadence: float = 0.05

    def __post_init__(self):
        q = np.asarray(self.quantiles, dtype=float)
        if q.size < 2:
            raise ValueError("need at least two quantiles")
        if np.any((q <= 0) | (q >= 1)) or np.any(np.diff(q) <= 0):
            raise ValueError("quantiles must be strictly increasing in (0, 1)")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")

    @property
    def n_traj(self) -> int:
        return len(self.quantiles)


def free_gaussian_velocity(x, t, params: PacketParams, units=None):
    """u + (x - xc - ut) (hbar t / 4 m sigma0^2 sigma_t^2) * (hbar/m)."""
    u = units or SCALED
    s0 = params.sigma0_bar
    _, sigma_t = complex_width(t, params, u)
    y = np.asarray(x) - params.xc_bar - group_velocity(params, u) * np.asarray(t)
    hm = u.hbar / u.mass
    return group_velocity(params, u) + hm * y * hm * np.asarray(t) / (4 * s0 ** 2 * sigma_t ** 2)


def velocity(field: WaveField, x, t):
    """Guidance velocity j / rho = (hbar/m) Im(Psi'/Psi).

    Closed-form log-derivatives are used for the free Gaussian and the
    interacting nonreflecting packet. Raises ``NodeProximity`` where
    rho <= RHO_FLOOR.
    """
    u = field.units or SCALED
    hm = u.hbar / u.mass
    fam = field.family
    if fam is Family.FREE_GAUSSIAN:
        rho = np.abs(free_gaussian(x, t, field.params, field.units)) ** 2
        dlog = free_gaussian_log_derivative(x, t, field.params, field.units)
    elif fam is Family.INTERACTING_NONREFLECTING:
        rho = np.abs(interacting_nonreflecting(x, t, field.params, field.norm_constant,
                                               field.units)) ** 2
        dlog = interacting_nonreflecting_log_derivative(x, t, field.params, field.units)
    else:
        psi = field.psi(x, t)
        rho = np.abs(psi) ** 2
        dlog = field.dpsi(x, t) / np.where(psi == 0, 1.0, psi)
    if np.any(rho <= RHO_FLOOR):
        raise NodeProximity(f"density below {RHO_FLOOR:g} at t={t}")
    return hm * np.imag(dlog)


def initial_velocity_nr(x, params: PacketParams):
    """v(x, 0) = u f3(x) / (16 sigma0^8 k0) / [k0^2 + (a tanh(ax) + (x - xc)/2 sigma0^2)^2]."""
    a, s0, xc, k0 = params.a_bar, params.sigma0_bar, params.xc_bar, params.k0_bar
    x = np.asarray(x)
    den = k0 ** 2 + (a * np.tanh(a * x) + (x - xc) / (2 * s0 ** 2)) ** 2
    return params.u_bar * f3(x, params) / (16 * s0 ** 8 * k0) / den


def gaussian_trajectory(x0, t, params: PacketParams):
    """x(t) = xc + ut + (sigma_t / sigma0)(x0 - xc)."""
    _, sigma_t = complex_width(t, params)
    return params.xc_bar + params.u_bar * np.asarray(t) \
        + sigma_t / params.sigma0_bar * (np.asarray(x0) - params.xc_bar)


def launch_positions(field: WaveField, quantiles) -> np.ndarray:
    """Positions at which the t = 0 cumulative probability equals each quantile."""
    center, width = _window(field, 0.0)
    lo, hi = center - 8 * width, center + 8 * width
    out = []
    for q in quantiles:
        out.append(brentq(lambda x: cdf(field, x, 0.0) - q, lo, hi, xtol=1e-13, rtol=1e-14))
    return np.array(out)


def trajectory_from(field: WaveField, x0: float, t_final: float, ode: OdeSpec | None = None,
                    quantile: float = float("nan"), cadence: float = 0.05,
                    label: str = "") -> Trajectory:
    return ode_integrate(lambda x, t: float(velocity(field, x, t)), x0, 0.0, t_final,
                         ode, cadence=cadence, quantile=quantile, label=label)


def worker_count() -> int:
    raw = os.environ.get("QSCATTER_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def run_ensemble(field: WaveField, spec: EnsembleSpec | None = None,
                 workers: int | None = None) -> list[Trajectory]:
    """Integrate one trajectory per launch quantile; sorted by launch position."""
    spec = spec or EnsembleSpec()
    x0s = launch_positions(field, spec.quantiles)
    workers = workers or worker_count()

    def one(args):
        q, x0 = args
        try:
            return trajectory_from(field, float(x0), spec.t_final, spec.ode, quantile=q,
                                   cadence=spec.cadence, label=f"q{q:g}")
        except StiffnessFailure as exc:
            raise StiffnessFailure(f"quantile {q}: {exc}") from exc

    jobs = list(zip(spec.quantiles, x0s))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(one, jobs))
    else:
        trajs = [one(j) for j in jobs]
    return sorted(trajs, key=lambda tr: tr.x0)


def crossing_free(trajectories: list[Trajectory]) -> bool:
    """True when the ordering by position never changes along the common time grid."""
    xs = np.vstack([tr.x for tr in trajectories])
    return bool(np.all(np.diff(xs, axis=0) > 0))


def quantile_drift(field: WaveField, trajectory: Trajectory, t: float) -> float:
    """|CDF_t(x(t)) - q| for a trajectory launched at quantile q."""
    i = int(np.argmin(np.abs(trajectory.t - t)))
    if not math.isclose(trajectory.t[i], t, abs_tol=1e-9):
        raise ValueError(f"t={t} not on the trajectory grid")
    return abs(cdf(field, float(trajectory.x[i]), t) - trajectory.quantile)
