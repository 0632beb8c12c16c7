"""Numerical kernel: oscillatory line quadrature, complex erf, adaptive ODE
stepping, Richardson finite differences and a Crank-Nicolson reference
evolver.

The evolver is a verification oracle only; nothing in the production
evaluators calls it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu
from scipy.special import erf as _erf
from scipy.special import wofz

from .errors import BoundaryContamination, NonConvergence, StiffnessFailure

# Below this time the integral representations are not used; the packets are
# evaluated from their regular short-time forms instead.
T_SWITCH = 1e-3


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-11
    rel_tol: float = 1e-10
    envelope_cut: float = 8.0
    max_subdivisions: int = 4_000_000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.envelope_cut < 6:
            raise ValueError("envelope_cut must be >= 6")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def tightened(self, factor: float = 0.5) -> "QuadratureSpec":
        return QuadratureSpec(self.abs_tol * factor, self.rel_tol * factor,
                              self.envelope_cut, self.max_subdivisions)


@dataclass(frozen=True)
class OdeSpec:
    initial_step: float = 1e-3
    abs_tol: float = 1e-11
    rel_tol: float = 1e-11
    max_step: float = 0.5

    def __post_init__(self):
        vals = (self.initial_step, self.abs_tol, self.rel_tol, self.max_step)
        if min(vals) <= 0:
            raise ValueError("OdeSpec fields must be positive")
        if self.max_step < self.initial_step:
            raise ValueError("max_step must be >= initial_step")


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n_points: int
    t_final: float
    n_steps: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be < x_max")
        if self.n_points < 16:
            raise ValueError("n_points must be >= 16")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps


@dataclass
class Trajectory:
    """Time-stamped path x(t) with its launch position and quantile label."""

    x0: float
    quantile: float
    t: np.ndarray
    x: np.ndarray
    x_final: float
    label: str = ""
    n_steps: int = field(default=0, repr=False)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.x.tolist()))


# ---------------------------------------------------------------------------
# Gauss-Kronrod (7, 15) rule on [-1, 1]

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS = np.zeros(15)
_GAUSS[1:7:2] = _WG[:3]
_GAUSS[7] = _WG[3]
_GAUSS[9:14:2] = _WG[2::-1]

_CHUNK = 3_000_000


def _panel_edges(lo, hi, width, wavenumber):
    """Panel edges with widths capped at a quarter of the local wavelength."""
    base = 2.0 / width  # at least two panels per envelope width
    if wavenumber is None:
        n = max(16, int(math.ceil((hi - lo) * base)))
        return np.linspace(lo, hi, n + 1)
    xs = np.linspace(lo, hi, 4097)
    k = np.abs(np.asarray(wavenumber(xs), dtype=float))
    density = np.maximum(k / (0.5 * math.pi), base)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(xs))])
    n = max(16, int(math.ceil(cum[-1] * 1.05)))
    edges = np.interp(np.linspace(0.0, cum[-1], n + 1), cum, xs)
    edges[0], edges[-1] = lo, hi
    return edges


def _gk_panels(f, a, b):
    """Kronrod sums and error estimates on panels [a_i, b_i]; shapes (B, P)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    kron_parts, gauss_parts = [], []
    start, per = 0, min(a.size, 64)  # first chunk reveals the batch size
    while start < a.size:
        hs, ms = half[start:start + per], mid[start:start + per]
        nodes = (ms[:, None] + hs[:, None] * _NODES[None, :]).ravel()
        vals = np.asarray(f(nodes), dtype=complex)
        batch_shape = vals.shape[:-1]
        vals = vals.reshape(batch_shape + (hs.size, 15))
        kron = vals @ _KRONROD
        # QUADPACK error scaling: |K - G| relative to the mean absolute deviation
        asc = np.abs(vals - 0.5 * kron[..., None]) @ _KRONROD
        diff = np.abs(kron - vals @ _GAUSS)
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = np.where(asc > 0, asc * np.minimum(1.0, (200 * diff / asc) ** 1.5), diff)
        kron_parts.append(kron * hs)
        gauss_parts.append(scaled * hs)
        start += hs.size
        per = max(1, _CHUNK // (15 * max(1, int(np.prod(batch_shape)))))
    return np.concatenate(kron_parts, axis=-1), np.concatenate(gauss_parts, axis=-1)


def integrate_complex_line(f: Callable[[np.ndarray], np.ndarray], center: float,
                           width: float, spec: QuadratureSpec | None = None,
                           wavenumber: Callable[[np.ndarray], np.ndarray] | None = None,
                           full_output: bool = False):
    """Integrate a Gaussian-damped, possibly oscillatory function over the line.

    ``f`` maps a 1-D array of nodes to values of the same length, or to an
    array of shape ``(B, n)`` for a batch of ``B`` integrands sharing one
    envelope. The line is truncated to ``center +- envelope_cut * width``.
    ``wavenumber`` (optional) gives the local phase gradient |d(arg f)/dx|
    used to seed panels no wider than a quarter wavelength; panels are then
    bisected until the Gauss-Kronrod error estimate meets
    ``max(abs_tol, rel_tol*|I|)``.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    spec = spec or QuadratureSpec()
    lo = center - spec.envelope_cut * width
    hi = center + spec.envelope_cut * width
    edges = _panel_edges(lo, hi, width, wavenumber)
    a, b = edges[:-1], edges[1:]
    length = hi - lo
    n_panels = a.size
    accepted = None
    accepted_err = None
    while True:
        if n_panels > spec.max_subdivisions:
            est = accepted if accepted is not None else 0.0
            raise NonConvergence(
                f"subdivision budget {spec.max_subdivisions} exhausted",
                estimate=est, error=accepted_err)
        kron, err = _gk_panels(f, a, b)
        if accepted is None:
            accepted = np.zeros(kron.shape[:-1], dtype=complex)
            accepted_err = np.zeros(kron.shape[:-1])
        total = accepted + kron.sum(axis=-1)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total))
        share = tol[..., None] * ((b - a) / length)
        ok = np.all(err <= share, axis=tuple(range(err.ndim - 1)))
        accepted = accepted + kron[..., ok].sum(axis=-1)
        accepted_err = accepted_err + err[..., ok].sum(axis=-1)
        if ok.all():
            break
        bad_a, bad_b = a[~ok], b[~ok]
        m = 0.5 * (bad_a + bad_b)
        a = np.concatenate([bad_a, m])
        b = np.concatenate([m, bad_b])
        n_panels += bad_a.size
    if accepted.ndim == 0:
        accepted = complex(accepted)
        accepted_err = float(accepted_err)
    if full_output:
        return accepted, accepted_err
    return accepted


# ---------------------------------------------------------------------------
# complex error function


def erf_complex(z):
    """Error function continued to complex arguments (Faddeeva-based)."""
    out = _erf(np.asarray(z, dtype=complex))
    return complex(out) if np.ndim(out) == 0 else out


def erf_times_exp(z, log_factor):
    """Return erf(z) * exp(log_factor) without overflowing intermediate terms.

    For large |z| off the real axis erf(z) grows like exp(-z**2); the growth is
    combined with ``log_factor`` before exponentiating.
    """
    z = np.asarray(z, dtype=complex)
    log_factor = np.asarray(log_factor)
    s = np.where(z.real >= 0, 1.0, -1.0)
    zz = s * z
    tail = np.exp(-zz * zz + log_factor) * wofz(1j * zz)
    return s * (np.exp(log_factor) - tail)


def erf_series(z, terms: int = 200):
    """Maclaurin series of erf; reference for |z| of order one."""
    z = complex(z)
    total = 0.0 + 0.0j
    term = z
    for n in range(terms):
        contrib = term / (2 * n + 1)
        total += contrib
        if abs(contrib) < 1e-18 * max(abs(total), 1e-300):
            break
        term *= -z * z / (n + 1)
    return 2.0 / math.sqrt(math.pi) * total


# ---------------------------------------------------------------------------
# ODE integration


def ode_integrate(v: Callable[[float, float], float], x0: float, t0: float, t1: float,
                  spec: OdeSpec | None = None, cadence: float = 0.05,
                  quantile: float = float("nan"), label: str = "") -> Trajectory:
    """Integrate dx/dt = v(x, t) with an embedded 8(5,3) Runge-Kutta pair.

    The returned samples lie on a fixed ``cadence`` grid (plus both endpoints),
    interpolated from the dense output, sorted by increasing time.
    """
    spec = spec or OdeSpec()
    if t1 == t0:
        raise ValueError("t1 must differ from t0")

    def rhs(t, y):
        return [v(y[0], t)]

    try:
        sol = solve_ivp(rhs, (t0, t1), [x0], method="DOP853", dense_output=True,
                        rtol=spec.rel_tol, atol=spec.abs_tol,
                        first_step=spec.initial_step, max_step=spec.max_step)
    except StiffnessFailure:
        raise
    except Exception as exc:  # velocity evaluator refused (density node)
        raise StiffnessFailure(f"trajectory from x0={x0} failed: {exc}") from exc
    if sol.status != 0:
        raise StiffnessFailure(f"trajectory from x0={x0} failed: {sol.message}")
    lo, hi = min(t0, t1), max(t0, t1)
    grid = np.arange(lo, hi, cadence)
    grid = np.unique(np.concatenate([grid, [lo, hi]]))
    xs = sol.sol(grid)[0]
    # exact endpoints from the stepper rather than the interpolant
    xs[np.argmin(np.abs(grid - t0))] = x0
    xs[np.argmin(np.abs(grid - t1))] = sol.y[0, -1]
    return Trajectory(x0=float(x0), quantile=quantile, t=grid, x=xs,
                      x_final=float(sol.y[0, -1]), label=label, n_steps=sol.t.size - 1)


# ---------------------------------------------------------------------------
# finite differences

_STENCIL_8 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72,
                       8 / 5, -1 / 5, 8 / 315, -1 / 560])


def fd_derivative(f, x, order: int = 1, h: float = 1e-2, levels: int = 4):
    """Central difference of order 1 or 2 refined by Richardson extrapolation.

    ``f`` is a callable (vectorised over ``x`` is fine) or a sampled field
    given as ``(grid, values)``. Returns ``(value, error_estimate)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if isinstance(f, tuple):
        grid, values = f
        f = CubicSpline(np.asarray(grid), np.asarray(values))
    x = np.asarray(x)
    table: list[list] = []
    for i in range(levels):
        hi = h / 2 ** i
        if order == 1:
            d = (f(x + hi) - f(x - hi)) / (2 * hi)
        else:
            d = (f(x + hi) - 2 * f(x) + f(x - hi)) / hi ** 2
        row = [d]
        for j in range(1, i + 1):
            row.append(row[j - 1] + (row[j - 1] - table[i - 1][j - 1]) / (4 ** j - 1))
        table.append(row)
    best = table[-1][-1]
    err = np.abs(best - table[-2][-2]) if levels > 1 else np.abs(best) * 0.0
    return best, err


# ---------------------------------------------------------------------------
# reference evolver


def _hamiltonian(potential: np.ndarray, dx: float):
    n = potential.size
    offsets = np.arange(-4, 5)
    diags = [np.full(n - abs(o), c) for o, c in zip(offsets, _STENCIL_8)]
    lap = sparse.diags(diags, offsets, shape=(n, n), format="csc") / dx ** 2
    return -0.5 * lap + sparse.diags(potential, 0, format="csc")


def evolve_reference(psi0: np.ndarray, potential: np.ndarray, grid: GridSpec,
                     edge_width: int = 4, return_norms: bool = False):
    """Crank-Nicolson evolution with an eighth-order Laplacian and hard walls.

    Unitary up to the linear-solve rounding. Raises ``BoundaryContamination``
    if |psi| at the outermost ``edge_width`` nodes exceeds 1e-4 at any step
    (or 1e-8 initially).
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    potential = np.broadcast_to(np.asarray(potential, dtype=float), psi.shape)
    if psi.size != grid.n_points:
        raise ValueError("psi0 does not match grid")
    edge = np.r_[0:edge_width, psi.size - edge_width:psi.size]
    if np.abs(psi[edge]).max() > 1e-8:
        raise BoundaryContamination("initial wavefunction not negligible at the edges")
    ham = _hamiltonian(np.ascontiguousarray(potential), grid.dx)
    eye = sparse.identity(psi.size, dtype=complex, format="csc")
    lhs = (eye + 0.5j * grid.dt * ham).tocsc()
    rhs = (eye - 0.5j * grid.dt * ham).tocsr()
    lu = splu(lhs)
    norms = [np.sum(np.abs(psi) ** 2) * grid.dx] if return_norms else None
    for step in range(grid.n_steps):
        psi = lu.solve(rhs @ psi)
        if np.abs(psi[edge]).max() > 1e-4:
            raise BoundaryContamination(f"edge amplitude above 1e-4 at step {step + 1}")
        if return_norms:
            norms.append(np.sum(np.abs(psi) ** 2) * grid.dx)
    if return_norms:
        return psi, np.array(norms)
    return psi
