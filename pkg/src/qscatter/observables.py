"""Density, current, moments and normalization of the packet families."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (DEFAULT_PARAMS, SCALED, Family, PacketParams, ScaledUnits,
                    WaveField, bracket, complex_width, free_gaussian,
                    group_velocity, initial_gaussian)
from .numerics import QuadratureSpec, fd_derivative, integrate_complex_line


@dataclass(frozen=True)
class FlowSample:
    x_bar: float
    t: float
    rho: float
    j: float
    v: float


@dataclass(frozen=True)
class MomentRecord:
    t: float
    mean_x: float
    mean_p: float
    delta_x: float


@dataclass(frozen=True)
class Normalization:
    norm_constant: float
    squared_norm: float


# ---------------------------------------------------------------------------
# closed forms for the interacting nonreflecting packet
#
# The current is kept as a cubic polynomial in the mass so its mass dependence
# stays visible; X = x - xc throughout.


def f3(x, params: PacketParams, units: ScaledUnits | None = None):
    a, s0, xc, k0 = params.a_bar, params.sigma0_bar, params.xc_bar, params.k0_bar
    x = np.asarray(x)
    X = x - xc
    return 4 * (4 * k0 ** 3 * s0 ** 8
                + k0 * s0 ** 4 * (2 * s0 ** 2 + 4 * a ** 2 * s0 ** 4 + X ** 2)
                + 4 * a * k0 * s0 ** 6 * X * np.tanh(a * x))


def f2(x, t, params: PacketParams, units: ScaledUnits | None = None):
    # The cubic term enters with weight 1, not 4: the current from
    # Im(Psi* dPsi/dx) demands hbar t [4(...) + X^3].
    hbar = (units or SCALED).hbar
    a, s0, xc, k0 = params.a_bar, params.sigma0_bar, params.xc_bar, params.k0_bar
    x = np.asarray(x)
    X = x - xc
    th = np.tanh(a * x)
    return hbar * np.asarray(t) * (
        4 * (a ** 2 * s0 ** 4 * X + k0 ** 2 * s0 ** 4 * X
             - a * s0 ** 2 * (s0 ** 2 + 4 * k0 ** 2 * s0 ** 4 - X ** 2) * th)
        + X ** 3)


def f1(x, t, params: PacketParams, units: ScaledUnits | None = None):
    hbar = (units or SCALED).hbar
    a, s0, xc, k0 = params.a_bar, params.sigma0_bar, params.xc_bar, params.k0_bar
    x = np.asarray(x)
    X = x - xc
    return hbar ** 2 * np.asarray(t) ** 2 * (
        2 * k0 * s0 ** 2 * (1 + 2 * a ** 2 * s0 ** 2)
        - 4 * a * k0 * s0 ** 2 * X * np.tanh(a * x))


def f0(x, t, params: PacketParams, units: ScaledUnits | None = None):
    hbar = (units or SCALED).hbar
    a, xc = params.a_bar, params.xc_bar
    x = np.asarray(x)
    return a * hbar ** 3 * np.asarray(t) ** 3 * (a * (x - xc) - np.tanh(a * x))


def _gauss_envelope(x, t, params, units):
    _, sigma_t = complex_width(t, params, units)
    y = np.asarray(x) - params.xc_bar - group_velocity(params, units) * np.asarray(t)
    return sigma_t, np.exp(-y ** 2 / (2 * sigma_t ** 2)), y


def rho_closed(x, t, params: PacketParams = DEFAULT_PARAMS, norm2: float = 1.0,
               units: ScaledUnits | None = None):
    """|N|^2 [(k0 + hbar t y / 4 m s0^2 s_t^2)^2 + (a tanh + y / 2 s_t^2)^2] G(y)."""
    u = units or SCALED
    a, s0, k0 = params.a_bar, params.sigma0_bar, params.k0_bar
    sigma_t, env, y = _gauss_envelope(x, t, params, u)
    t = np.asarray(t)
    re = k0 + u.hbar * t * y / (4 * u.mass * s0 ** 2 * sigma_t ** 2)
    im = a * np.tanh(a * np.asarray(x)) + y / (2 * sigma_t ** 2)
    return norm2 * (re ** 2 + im ** 2) * env / (math.sqrt(2 * math.pi) * sigma_t)


def current_closed(x, t, params: PacketParams = DEFAULT_PARAMS, norm2: float = 1.0,
                   units: ScaledUnits | None = None, coefficients=None):
    """Probability current of the interacting nonreflecting packet.

    ``coefficients`` may override the (f3, f2, f1, f0) callables; used by the
    mutation check of the validation suite.
    """
    u = units or SCALED
    m, hbar, s0 = u.mass, u.hbar, params.sigma0_bar
    c3, c2, c1, c0 = coefficients or (f3, f2, f1, f0)
    sigma_t, env, _ = _gauss_envelope(x, t, params, u)
    poly = (c3(x, params, u) * m ** 3 + c2(x, t, params, u) * m ** 2
            + c1(x, t, params, u) * m + c0(x, t, params, u))
    return norm2 * m * s0 * hbar * math.sqrt(2 / math.pi) * poly \
        / (2 * m * s0 * sigma_t) ** 5 * env


# ---------------------------------------------------------------------------
# generic evaluators


def rho_generic(field: WaveField, x, t):
    return np.abs(field.psi(x, t)) ** 2


def _hbar_over_m(field: WaveField) -> float:
    u = field.units or SCALED
    return u.hbar / u.mass


def current_generic(field: WaveField, x, t, h: float = 1e-3, method: str = "auto"):
    """(hbar/m) Im(Psi* dPsi/dx).

    ``method="auto"`` uses the field's derivative (closed form, or the
    differentiated propagator integral); ``"fd"`` forces Richardson-refined
    central differences with step ``h``.
    """
    psi = field.psi(x, t)
    if method == "auto":
        dpsi = field.dpsi(x, t)
    elif method == "fd":
        dpsi, _ = fd_derivative(lambda xx: field.psi(xx, t), np.asarray(x, dtype=float), 1, h)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _hbar_over_m(field) * np.imag(np.conj(psi) * dpsi)


def flow(field: WaveField, x, t) -> list[FlowSample]:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    psi = field.psi(x, t)
    dpsi = field.dpsi(x, t)
    rho = np.abs(psi) ** 2
    j = _hbar_over_m(field) * np.imag(np.conj(psi) * dpsi)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(rho > 0, j / rho, np.nan)
    return [FlowSample(float(a), float(t), float(b), float(c), float(d))
            for a, b, c, d in zip(x, rho, j, v)]


# ---------------------------------------------------------------------------
# normalization and moments


def normalize(family: Family, params: PacketParams = DEFAULT_PARAMS,
              quad: QuadratureSpec | None = None,
              units: ScaledUnits | None = None) -> Normalization:
    """N = (int |unnormalized Psi(x, 0)|^2 dx)^(-1/2) and the squared norm itself.

    Both nonreflecting families share the initial state
    bracket(x, 0) * Psi_G(x, 0); the Gaussian families are already normalized.
    """
    family = Family(family)
    if family in (Family.FREE_GAUSSIAN, Family.INTERACTING_GAUSSIAN):
        return Normalization(1.0, 1.0)
    quad = quad or QuadratureSpec()

    def integrand(x):
        return np.abs(bracket(x, 0.0, params, units) * free_gaussian(x, 0.0, params, units)) ** 2

    sq = integrate_complex_line(integrand, params.xc_bar, params.sigma0_bar, quad).real
    return Normalization(1.0 / math.sqrt(sq), sq)


def make_field(family, params: PacketParams = DEFAULT_PARAMS,
               quad: QuadratureSpec | None = None,
               units: ScaledUnits | None = None) -> WaveField:
    family = Family(family)
    quad = quad or QuadratureSpec()
    norm = normalize(family, params, quad, units)
    return WaveField(family, params, norm.norm_constant, quad, units)


def _window(field: WaveField, t: float) -> tuple[float, float]:
    center, sigma_t = field.envelope(t)
    # 12 sigma_t on either side once envelope_cut (8) is applied
    return center, 1.5 * sigma_t + 0.5


def moments(field: WaveField, t: float, quad: QuadratureSpec | None = None) -> MomentRecord:
    """<x>, <p> = int j dx and Delta x at time t, by one batched quadrature."""
    quad = quad or field.quad
    hm = _hbar_over_m(field)
    mass = (field.units or SCALED).mass

    def integrand(x):
        psi = field.psi(x, t)
        dpsi = field.dpsi(x, t)
        rho = np.abs(psi) ** 2
        j = hm * np.imag(np.conj(psi) * dpsi)
        return np.stack([rho, x * rho, x * x * rho, j])

    center, width = _window(field, t)
    norm, m1, m2, jint = integrate_complex_line(integrand, center, width, quad).real
    mean_x = m1 / norm
    var = m2 / norm - mean_x ** 2
    return MomentRecord(t=float(t), mean_x=mean_x, mean_p=mass * jint / norm,
                        delta_x=math.sqrt(max(var, 0.0)))


def norm_at(field: WaveField, t: float, quad: QuadratureSpec | None = None) -> float:
    quad = quad or field.quad
    center, width = _window(field, t)
    return integrate_complex_line(lambda x: np.abs(field.psi(x, t)) ** 2,
                                  center, width, quad).real


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _segment_integral(func, lo, hi, panel):
    """Composite 20-point Gauss-Legendre integral of a smooth function."""
    if hi <= lo:
        return 0.0
    n = max(1, int(math.ceil((hi - lo) / panel)))
    edges = np.linspace(lo, hi, n + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    vals = np.asarray(func(nodes)).reshape(n, _GL_X.size)
    return float(np.sum((vals @ _GL_W) * half))


def cdf(field: WaveField, x: float, t: float) -> float:
    """Probability of finding the particle left of x at time t."""
    center, width = _window(field, t)
    lo = center - 8 * width
    panel = width / 2
    rho = lambda xx: np.abs(field.psi(xx, t)) ** 2  # noqa: E731
    if x <= lo:
        return 0.0
    hi = center + 8 * width
    if x >= hi:
        return 1.0
    total = _segment_integral(rho, lo, hi, panel)
    return _segment_integral(rho, lo, x, panel) / total


def mass_left_of(field: WaveField, x: float, t: float) -> float:
    """Probability in (-inf, x) at time t (not renormalized)."""
    center, width = _window(field, t)
    lo = min(center - 8 * width, x - 8 * width)
    rho = lambda xx: np.abs(field.psi(xx, t)) ** 2  # noqa: E731
    return _segment_integral(rho, lo, x, width / 2)


def initial_gaussian_density(x, params: PacketParams = DEFAULT_PARAMS):
    return np.abs(initial_gaussian(x, params)) ** 2


# ---------------------------------------------------------------------------
# residual checks for the closed forms


def schrodinger_residual(x, t, params: PacketParams = DEFAULT_PARAMS, norm_constant: float = 1.0,
                         h: float = 1e-2):
    """Relative residual of i dPsi/dt = -Psi''/2 + V Psi for the interacting
    nonreflecting packet (scaled units).

    dPsi/dt and Psi'' (from the closed-form Psi') use Richardson-refined
    central differences.
    """
    from .model import interacting_nonreflecting, interacting_nonreflecting_dx, potential
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    psi = interacting_nonreflecting(x, t, params, norm_constant)
    dt, _ = fd_derivative(lambda tt: interacting_nonreflecting(x, tt, params, norm_constant), t, 1, h)
    dxx, _ = fd_derivative(lambda xx: interacting_nonreflecting_dx(xx, t, params, norm_constant),
                           x, 1, h)
    v_psi = potential(x, params) * psi
    res = 1j * dt + 0.5 * dxx - v_psi
    scale = np.abs(dt) + 0.5 * np.abs(dxx) + np.abs(v_psi)
    return np.abs(res) / scale


def continuity_residual(x, t, params: PacketParams = DEFAULT_PARAMS, norm2: float = 1.0,
                        coefficients=None, h: float = 1e-2):
    """Relative residual of d rho/dt + dj/dx = 0 for the closed-form pair."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    drho, _ = fd_derivative(lambda tt: rho_closed(x, tt, params, norm2), t, 1, h)
    dj, _ = fd_derivative(lambda xx: current_closed(xx, t, params, norm2,
                                                    coefficients=coefficients), x, 1, h)
    return np.abs(drho + dj) / (np.abs(drho) + np.abs(dj))


def random_probes(n: int, params: PacketParams = DEFAULT_PARAMS, t_range=(0.0, 20.0),
                  rho_min: float = 1e-6, norm2: float = 1.0, seed: int = 0):
    """n (x, t) points inside the packet with rho above rho_min, from a fixed seed."""
    rng = np.random.default_rng(seed)
    xs, ts = [], []
    while len(xs) < n:
        t = rng.uniform(*t_range, size=4 * n)
        _, sigma_t = complex_width(t, params)
        center = params.xc_bar + params.u_bar * t
        x = center + rng.uniform(-4, 4, size=t.size) * sigma_t
        keep = rho_closed(x, t, params, norm2) > rho_min
        xs.extend(x[keep])
        ts.extend(t[keep])
    return np.array(xs[:n]), np.array(ts[:n])
