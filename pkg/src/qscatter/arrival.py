"""Arrival-time distribution Pi(x_d, t) = |j(x_d, t)| / int |j| dt and its mean."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

from .errors import QScatterError, TruncationTooTight
from .model import SCALED, WaveField, complex_width, group_velocity
from .numerics import QuadratureSpec
from .observables import mass_left_of

TAIL_LIMIT = 1e-4
# The packet envelope at the detector is below exp(-LEAD_EXPONENT) before the
# integration window opens.
LEAD_EXPONENT = 60.0


@dataclass
class ArrivalRecord:
    x_d: float
    t_grid: np.ndarray
    pi_values: np.ndarray
    weights: np.ndarray
    mean_time: float
    mass_captured: float
    t_max: float
    tail_bound: float
    t_start: float = 0.0
    signed_mass: float = float("nan")
    family: str = ""
    # probability still left of the detector at t_max, computed directly
    residual_mass: float = float("nan")

    @property
    def backflow(self) -> float:
        """Relative gap between int |j| dt and int j dt."""
        return (self.mass_captured - self.signed_mass) / self.mass_captured

    @property
    def time_width(self) -> float:
        m = np.sum(self.weights * self.t_grid * self.pi_values)
        m2 = np.sum(self.weights * self.t_grid ** 2 * self.pi_values)
        return math.sqrt(max(m2 - m * m, 0.0))

    def normalization(self) -> float:
        return float(np.sum(self.weights * self.pi_values))


def detector_current(field: WaveField, x_d: float, t) -> np.ndarray:
    """j(x_d, t) for an array of times."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    u = field.units or SCALED
    hm = u.hbar / u.mass
    x = np.full(t.shape, float(x_d))
    psi = field.psi(x, t)
    dpsi = field.dpsi(x, t)
    return hm * np.imag(np.conj(psi) * dpsi)


def default_t_max(x_d: float, field: WaveField) -> float:
    """3 ballistic crossing times, at least 40 s."""
    u = group_velocity(field.params, field.units)
    return max(3.0 * abs(x_d - field.params.xc_bar) / u, 40.0)


def tail_bound(field: WaveField, x_d: float, t_max: float) -> float:
    """Gaussian-envelope estimate of the arrival mass beyond t_max.

    The envelope is centered on the ballistic crossing time with the packet
    width at that time converted to a duration.
    """
    u = group_velocity(field.params, field.units)
    t_c = abs(x_d - field.params.xc_bar) / u
    _, sigma_x = complex_width(t_c, field.params, field.units)
    sigma_time = float(sigma_x) / u
    return float(0.5 * erfc((t_max - t_c) / (math.sqrt(2) * sigma_time)))


def window_start(field: WaveField, x_d: float, t_max: float) -> float:
    """First time the Gaussian envelope at x_d exceeds exp(-LEAD_EXPONENT)."""
    u = group_velocity(field.params, field.units)

    def exponent(t):
        _, s = complex_width(t, field.params, field.units)
        y = x_d - field.params.xc_bar - u * t
        return y * y / (2 * float(s) ** 2) - LEAD_EXPONENT

    if exponent(0.0) <= 0:
        return 0.0
    if exponent(t_max) > 0:
        raise TruncationTooTight(f"packet never reaches x_d={x_d} before t_max={t_max}")
    return brentq(exponent, 0.0, t_max, xtol=1e-10)


def _simpson_nodes(func, lo, hi, tol, max_depth=40):
    """Adaptive Simpson on [lo, hi]; returns accepted nodes and weights.

    Each accepted interval contributes 5 nodes with composite weights
    h/12 (1, 4, 2, 4, 1), so sum(w f) is the integral estimate.
    """
    pending = [(lo, hi)]
    cache: dict[float, float] = {}

    def values(ts):
        need = [t for t in ts if t not in cache]
        if need:
            vals = func(np.array(need))
            cache.update(zip(need, np.asarray(vals, dtype=float)))
        return np.array([cache[t] for t in ts])

    nodes_out, weights_out = [], []
    depth = 0
    while pending:
        if depth > max_depth:
            raise TruncationTooTight("adaptive Simpson did not converge")
        a = np.array([p[0] for p in pending])
        b = np.array([p[1] for p in pending])
        h = b - a
        pts = a[:, None] + h[:, None] * np.array([0, 0.25, 0.5, 0.75, 1.0])[None, :]
        vals = values(list(pts.ravel())).reshape(pts.shape)
        coarse = h / 6 * (vals[:, 0] + 4 * vals[:, 2] + vals[:, 4])
        fine = h / 12 * (vals[:, 0] + 4 * vals[:, 1] + 2 * vals[:, 2] + 4 * vals[:, 3] + vals[:, 4])
        share = tol * h / (hi - lo)
        ok = np.abs(fine - coarse) <= 15 * share
        for i in np.nonzero(ok)[0]:
            nodes_out.append(pts[i])
            weights_out.append(h[i] / 12 * np.array([1, 4, 2, 4, 1.0]))
        pending = []
        for i in np.nonzero(~ok)[0]:
            mid = 0.5 * (a[i] + b[i])
            pending += [(a[i], mid), (mid, b[i])]
        depth += 1
    nodes = np.concatenate(nodes_out)
    weights = np.concatenate(weights_out)
    # merge the shared endpoints of adjacent intervals
    order = np.argsort(nodes, kind="stable")
    nodes, weights = nodes[order], weights[order]
    uniq, inv = np.unique(nodes, return_inverse=True)
    w = np.zeros(uniq.size)
    np.add.at(w, inv, weights)
    return uniq, w


def _kinks(jfunc, lo, hi, step):
    """Sign changes of j located by bisection on a coarse scan."""
    ts = np.linspace(lo, hi, max(2, int(math.ceil((hi - lo) / step)) + 1))
    js = jfunc(ts)
    zeros = []
    for i in np.nonzero(np.sign(js[:-1]) * np.sign(js[1:]) < 0)[0]:
        zeros.append(brentq(lambda t: float(jfunc(np.array([t]))[0]), ts[i], ts[i + 1],
                            xtol=1e-12))
    return zeros


def arrival_distribution(field: WaveField, x_d: float, t_max: float | None = None,
                         quad: QuadratureSpec | None = None, tol: float = 1e-10,
                         scan_step: float = 0.1) -> ArrivalRecord:
    """Arrival-time density at a detector, integrated up to ``t_max``.

    |j| is integrated by adaptive Simpson on segments split at the zeros of j.
    Raises ``TruncationTooTight`` when the estimated truncated mass exceeds
    1e-4.
    """
    if quad is not None:
        field = field.with_quad(quad)
    if t_max is None:
        t_max = default_t_max(x_d, field)
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    bound = tail_bound(field, x_d, t_max)
    if bound > TAIL_LIMIT:
        raise TruncationTooTight(
            f"t_max={t_max} leaves an estimated {bound:.2e} of the arrival mass")
    t0 = window_start(field, x_d, t_max)

    def jfunc(ts):
        return detector_current(field, x_d, ts)

    cuts = [t0] + _kinks(jfunc, t0, t_max, scan_step) + [t_max]
    nodes, weights = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n, w = _simpson_nodes(lambda ts: np.abs(jfunc(ts)), lo, hi, tol * (hi - lo) / (t_max - t0))
        nodes.append(n)
        weights.append(w)
    t_grid = np.concatenate(nodes)
    w = np.concatenate(weights)
    order = np.argsort(t_grid, kind="stable")
    t_grid, w = t_grid[order], w[order]
    uniq, inv = np.unique(t_grid, return_inverse=True)
    w_merged = np.zeros(uniq.size)
    np.add.at(w_merged, inv, w)
    t_grid, w = uniq, w_merged
    j = jfunc(t_grid)
    mass = float(np.sum(w * np.abs(j)))
    if mass <= 0:
        raise TruncationTooTight(f"no current reaches x_d={x_d} before t_max={t_max}")
    pi = np.abs(j) / mass
    record = ArrivalRecord(
        x_d=float(x_d), t_grid=t_grid, pi_values=pi, weights=w, mean_time=0.0,
        mass_captured=mass, t_max=float(t_max), tail_bound=bound, t_start=t0,
        signed_mass=float(np.sum(w * j)), family=field.family.value,
        residual_mass=mass_left_of(field, float(x_d), float(t_max)))
    record.mean_time = mean_arrival(record)
    return record


def mean_arrival(record: ArrivalRecord) -> float:
    """First moment of Pi with the record's quadrature weights."""
    return float(np.sum(record.weights * record.t_grid * record.pi_values))


def pi_on_grid(field: WaveField, record: ArrivalRecord, t) -> np.ndarray:
    """Pi evaluated at arbitrary times using the record's normalization."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    inside = (t >= record.t_start) & (t <= record.t_max)
    if np.any(inside):
        out[inside] = np.abs(detector_current(field, record.x_d, t[inside])) / record.mass_captured
    return out


@dataclass
class SweepResult:
    records: list[ArrivalRecord] = field(default_factory=list)
    failures: list[tuple[str, float, QScatterError]] = field(default_factory=list)

    def tau(self, family: str, x_d: float) -> float:
        for r in self.records:
            if r.family == family and r.x_d == x_d:
                return r.mean_time
        raise KeyError((family, x_d))


def detector_sweep(fields: list[WaveField], x_d_list, t_max: float | None = None,
                   quad: QuadratureSpec | None = None) -> SweepResult:
    """One record per (field, detector), in input order; failures are collected."""
    if not fields or len(x_d_list) == 0:
        raise ValueError("fields and detectors must be nonempty")
    result = SweepResult()
    for fld in fields:
        for x_d in x_d_list:
            try:
                result.records.append(arrival_distribution(fld, float(x_d), t_max, quad))
            except QScatterError as exc:
                result.failures.append((fld.family.value, float(x_d), exc))
    return result
