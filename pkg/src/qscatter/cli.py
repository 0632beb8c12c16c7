"""Command-line front end: figure data as CSV + JSON sidecars, validation, unit conversion.

    python3 -m qscatter density --out run1
    python3 -m qscatter arrival --detectors 2,4,6 --t-max 60
    python3 -m qscatter validate
    python3 -m qscatter units --mass 9.109e-31 --quantity x --value 1e-9
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import constants

from . import __version__
from .arrival import detector_sweep, pi_on_grid
from .bohmian import (EnsembleSpec, crossing_free, gaussian_trajectory, initial_velocity_nr,
                      quantile_drift, run_ensemble, trajectory_from, worker_count)
from .errors import ConfigError, QScatterError
from .model import Family, PacketParams, ScaledUnits, potential
from .numerics import GridSpec, OdeSpec, QuadratureSpec, evolve_reference
from .observables import (continuity_residual, current_closed, f0, f1, f2, f3, make_field,
                          moments, normalize, random_probes, rho_closed, rho_generic,
                          schrodinger_residual)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
FIGURE_FAMILIES = ("i,nr", "f,nr", "f,G")


@dataclass
class RunConfig:
    a_bar: float = 1.0
    sigma0_bar: float = 1.0
    xc_bar: float = -10.0
    k0_bar: float = 1.0
    families: list = field(default_factory=lambda: list(FIGURE_FAMILIES))
    times: list = field(default_factory=lambda: [0.0, 4.0, 8.0, 12.0, 16.0, 20.0])
    detectors: list = field(default_factory=lambda: [2.0, 4.0, 6.0])
    quantiles: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 10)])
    t_max: float | None = None
    t_final: float = 20.0
    moment_step: float = 0.25
    arrival_step: float = 0.05
    x_min: float = -30.0
    x_max: float = 40.0
    n_x: int = 2000
    quad_abs_tol: float = 1e-11
    quad_rel_tol: float = 1e-10
    ode_abs_tol: float = 1e-11
    ode_rel_tol: float = 1e-11
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def validate(self) -> "RunConfig":
        if not self.families:
            raise ConfigError("family list is empty")
        try:
            self.families = [Family.parse(f).value for f in self.families]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        try:
            self.params
            EnsembleSpec(tuple(self.quantiles), self.t_final)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.detectors:
            raise ConfigError("detector list is empty")
        if not all(math.isfinite(d) for d in self.detectors):
            raise ConfigError("detectors must be finite")
        if self.t_max is not None and self.t_max <= 0:
            raise ConfigError("t_max must be positive")
        if self.n_x < 2 or self.x_max <= self.x_min:
            raise ConfigError("bad density grid")
        if self.moment_step <= 0 or self.arrival_step <= 0:
            raise ConfigError("steps must be positive")
        return self

    @property
    def params(self) -> PacketParams:
        return PacketParams(self.a_bar, self.sigma0_bar, self.xc_bar, self.k0_bar)

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(abs_tol=self.quad_abs_tol, rel_tol=self.quad_rel_tol)

    @property
    def ode(self) -> OdeSpec:
        return OdeSpec(abs_tol=self.ode_abs_tol, rel_tol=self.ode_rel_tol)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# output


def fmt(v) -> str:
    return format(float(v), ".12g")


class Outputs:
    """Writes CSVs and sidecars; removes everything written if the command fails."""

    def __init__(self, config: RunConfig, command: str):
        self.config = config
        self.command = command
        self.root = Path(config.output_dir)
        self.written: list[Path] = []

    def __enter__(self):
        self.root.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for p in self.written:
                p.unlink(missing_ok=True)
        return False

    def csv(self, name: str, header: list[str], rows, extra: dict | None = None) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
        text = buf.getvalue()
        path = self.root / name
        self.written.append(path)
        path.write_text(text, newline="")
        self.sidecar(path, text, extra)
        return path

    def sidecar(self, path: Path, text: str, extra: dict | None):
        cfg = self.config
        meta = {
            "file": path.name,
            "sha256": hashlib.sha256(text.encode()).hexdigest(),
            "command": self.command,
            "config_hash": cfg.digest(),
            "versions": {"qscatter": __version__, "numpy": np.__version__,
                         "scipy": _scipy_version()},
            "params": dataclasses.asdict(cfg.params),
            "tolerances": {"quadrature": dataclasses.asdict(cfg.quad),
                           "ode": dataclasses.asdict(cfg.ode)},
        }
        if extra:
            meta.update(extra)
        side = path.with_suffix(".json")
        self.written.append(side)
        side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _scipy_version() -> str:
    import scipy
    return scipy.__version__


def _pmap(func, items):
    items = list(items)
    n = min(worker_count(), len(items)) or 1
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(func, items))
    return [func(i) for i in items]


def _fields(config: RunConfig, families=None):
    fams = families or config.families
    return {f: make_field(f, config.params, config.quad) for f in fams}


# ---------------------------------------------------------------------------
# commands


def cmd_density(config: RunConfig) -> list[Path]:
    x = np.linspace(config.x_min, config.x_max, config.n_x)
    fields = _fields(config)
    out = []
    with Outputs(config, "density") as o:
        for t in config.times:
            cols = _pmap(lambda f: rho_generic(fields[f], x, float(t)), config.families)
            header = ["x_bar"] + [f"rho_{Family(f).slug}" for f in config.families]
            out.append(o.csv(f"density_t{fmt(t)}.csv", header, zip(x, *cols), {"t": float(t)}))
    return out


def moment_table(field_, times):
    return _pmap(lambda t: moments(field_, float(t)), times)


def cmd_moments(config: RunConfig) -> list[Path]:
    times = np.arange(0.0, config.t_final + 0.5 * config.moment_step, config.moment_step)
    fields = _fields(config)
    out = []
    with Outputs(config, "moments") as o:
        for fam, fld in fields.items():
            recs = moment_table(fld, times)
            out.append(o.csv(f"moments_{fld.family.slug}.csv", ["t", "mean_x", "mean_p", "delta_x"],
                             ((r.t, r.mean_x, r.mean_p, r.delta_x) for r in recs)))
    return out


def cmd_arrival(config: RunConfig) -> list[Path]:
    fields = _fields(config)
    sweep = detector_sweep(list(fields.values()), config.detectors, config.t_max, config.quad)
    if sweep.failures:
        fam, xd, exc = sweep.failures[0]
        raise type(exc)(f"{fam} at x_d={xd}: {exc}")
    out = []
    with Outputs(config, "arrival") as o:
        for xd in config.detectors:
            recs = [r for r in sweep.records if r.x_d == float(xd)]
            t_hi = max(r.t_max for r in recs)
            t = np.arange(0.0, t_hi + 0.5 * config.arrival_step, config.arrival_step)
            cols = [pi_on_grid(fields[r.family], r, t) for r in recs]
            diag = {r.family: {"tau": r.mean_time, "mass_captured": r.mass_captured,
                               "tail_bound": r.tail_bound, "residual_mass": r.residual_mass,
                               "t_max": r.t_max, "normalization": r.normalization()}
                    for r in recs}
            header = ["t"] + [f"pi_{Family(r.family).slug}" for r in recs]
            out.append(o.csv(f"arrival_xd{fmt(xd)}.csv", header, zip(t, *cols),
                             {"x_d": float(xd), "records": diag}))
        header = ["x_d"] + [f"tau_{Family(f).slug}" for f in config.families] \
            + [f"width_{Family(f).slug}" for f in config.families]
        rows = []
        for xd in config.detectors:
            row = [xd]
            byfam = {r.family: r for r in sweep.records if r.x_d == float(xd)}
            row += [byfam[f].mean_time for f in config.families]
            row += [byfam[f].time_width for f in config.families]
            rows.append(row)
        out.append(o.csv("arrival_summary.csv", header, rows))
    return out


def cmd_trajectories(config: RunConfig) -> list[Path]:
    fields = _fields(config)
    spec = EnsembleSpec(tuple(config.quantiles), config.t_final, config.ode)
    params = config.params
    out = []
    with Outputs(config, "trajectories") as o:
        for fam, fld in fields.items():
            trajs = run_ensemble(fld, spec)
            header = ["t"] + [f"x_q{fmt(tr.quantile)}" for tr in trajs]
            extra = {"x0": {fmt(tr.quantile): tr.x0 for tr in trajs},
                     "crossing_free": crossing_free(trajs)}
            out.append(o.csv(f"trajectories_{fld.family.slug}.csv", header,
                             zip(trajs[0].t, *[tr.x for tr in trajs]), extra))
        x = np.linspace(params.xc_bar - 5, params.xc_bar + 5, 201)
        v_nr = initial_velocity_nr(x, params)
        v_g = np.full(x.shape, params.u_bar)
        out.append(o.csv("initial_velocity.csv", ["x_bar", "v_nr_initial", "v_G_initial"],
                         zip(x, v_nr, v_g)))
        nr = make_field(Family.INTERACTING_NONREFLECTING, params, config.quad)
        x0 = moments(nr, 0.0).mean_x
        path = trajectory_from(nr, x0, config.t_final, config.ode, cadence=config.moment_step)
        recs = moment_table(nr, path.t)
        out.append(o.csv("bohm_vs_mean.csv", ["t", "mean_x", "bohm_x"],
                         ((r.t, r.mean_x, xb) for r, xb in zip(recs, path.x)), {"x0": x0}))
    return out


# ---------------------------------------------------------------------------
# validation suite


@dataclass
class Check:
    name: str
    tolerance: float
    measured: float
    passed: bool
    detail: str = ""


def _check(name, tol, value, passed=None, detail=""):
    ok = bool(value <= tol) if passed is None else bool(passed)
    return Check(name, float(tol), float(value), ok, detail)


def continuity_check(params, norm2, coefficients=None, n=100, tol=1e-5) -> Check:
    x, t = random_probes(n, params, norm2=norm2, seed=1)
    r = continuity_residual(x, t, params, norm2, coefficients=coefficients)
    return _check("continuity residual (closed rho, j)", tol, np.max(r))


def mutated_f2(scale=1.01):
    return (f3, lambda x, t, p, u=None: scale * f2(x, t, p, u), f1, f0)


def run_checks(config: RunConfig, include_oracle: bool = True) -> list[Check]:
    params = config.params
    quad = config.quad
    nz = normalize(Family.INTERACTING_NONREFLECTING, params, quad)
    n2 = nz.norm_constant ** 2
    nr = make_field(Family.INTERACTING_NONREFLECTING, params, quad)
    checks = [
        _check("squared norm vs 9/4", 0.01, abs(nz.squared_norm - 2.25)),
    ]
    m0 = moments(nr, 0.0)
    checks.append(_check("<p>(0) vs 11/9", 1e-3, abs(m0.mean_p - 11 / 9)))
    checks.append(_check("<x>(0) vs -94/9", 1e-3, abs(m0.mean_x + 94 / 9)))
    x, t = random_probes(50, params, norm2=n2, seed=0)
    checks.append(_check("Schrodinger residual (i,nr)", 1e-6,
                         np.max(schrodinger_residual(x, t, params, nz.norm_constant))))
    checks.append(continuity_check(params, n2))
    mut = continuity_check(params, n2, mutated_f2())
    checks.append(_check("mutation: f2 x 1.01 detected", 1e-5, mut.measured,
                         passed=mut.measured > 1e-5, detail="must exceed tolerance"))
    if include_oracle:
        grid = GridSpec(-60.0, 60.0, 4096, 8.0, 1600)
        xs = grid.x
        for fam, v in ((Family.INTERACTING_NONREFLECTING, potential(xs, params)),
                       (Family.FREE_NONREFLECTING, np.zeros_like(xs)),
                       (Family.INTERACTING_GAUSSIAN, potential(xs, params))):
            fld = make_field(fam, params, quad)
            ref = evolve_reference(fld.psi(xs, 0.0), v, grid)
            err = math.sqrt(np.sum(np.abs(ref - fld.psi(xs, 8.0)) ** 2) * grid.dx)
            checks.append(_check(f"Crank-Nicolson vs {fam.value} at t=8 (L2)", 1e-3, err))
    fg = make_field(Family.FREE_GAUSSIAN, params, quad)
    spec = EnsembleSpec(tuple(config.quantiles), config.t_final, config.ode)
    trajs = run_ensemble(fg, spec)
    dev = max(abs(tr.x_final - gaussian_trajectory(tr.x0, tr.t[-1], params)) for tr in trajs)
    checks.append(_check("free Gaussian Bohm paths vs closed form", 1e-5, dev))
    trajs = run_ensemble(nr, spec)
    checks.append(_check("non-crossing (i,nr deciles)", 0.0, 0.0 if crossing_free(trajs) else 1.0))
    drift = max(quantile_drift(nr, tr, tt) for tr in trajs for tt in (4.0, 8.0, 16.0)
                if tt <= config.t_final)
    checks.append(_check("equivariance drift (i,nr deciles)", 5e-3, drift))
    v_closed = float(initial_velocity_nr(params.xc_bar, params))
    xc = np.array([params.xc_bar])
    v_flow = float(current_closed(xc, 0.0, params, n2)[0] / rho_closed(xc, 0.0, params, n2)[0])
    checks.append(_check("initial velocity closed form vs j/rho", 1e-9, abs(v_closed - v_flow)))
    return checks


def cmd_validate(config: RunConfig, include_oracle: bool = True) -> tuple[int, list[Check]]:
    checks = run_checks(config, include_oracle)
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  measured={c.measured:.3e}"
              f"  tol={c.tolerance:.1e}")
    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    report = {"config_hash": config.digest(), "version": __version__,
              "checks": [dataclasses.asdict(c) for c in checks],
              "passed": all(c.passed for c in checks)}
    (root / "validate.json").write_text(json.dumps(report, indent=2) + "\n")
    return (EXIT_OK if report["passed"] else EXIT_FAIL), checks


def cmd_units(mass: float, hbar: float, quantity: str, value: float, scaled_input: bool = False):
    """Returns (unscaled, scaled) for one quantity."""
    u = ScaledUnits(mass, hbar)
    if scaled_input:
        return u.from_scaled(quantity, value), value
    return value, u.to_scaled(quantity, value)


# ---------------------------------------------------------------------------
# argument handling


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qscatter",
                                description="Wavepacket scattering by a reflectionless sech^2 well.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("--config", help="JSON file with RunConfig keys")
        sp.add_argument("--a-bar", type=float)
        sp.add_argument("--sigma0", type=float)
        sp.add_argument("--xc", type=float)
        sp.add_argument("--k0", type=float)
        sp.add_argument("--families", type=lambda s: [v for v in s.split(";") if v],
                        help="semicolon-separated, e.g. 'i,nr;f,G'")
        sp.add_argument("--times", type=_floats)
        sp.add_argument("--detectors", type=_floats)
        sp.add_argument("--quantiles", type=_floats)
        sp.add_argument("--t-max", type=float)
        sp.add_argument("--t-final", type=float)
        sp.add_argument("--out")

    for name in ("density", "moments", "arrival", "trajectories", "validate"):
        sp = sub.add_parser(name)
        run_flags(sp)
        if name == "validate":
            sp.add_argument("--skip-oracle", action="store_true",
                            help="skip the Crank-Nicolson comparisons")

    sp = sub.add_parser("units", help="convert between physical and scaled values")
    sp.add_argument("--mass", type=float, required=True, help="kg")
    sp.add_argument("--hbar", type=float, default=constants.hbar, help="J s")
    sp.add_argument("--quantity", required=True,
                    choices=["x", "length", "sigma", "a", "k", "p", "j", "v", "rho", "pi", "t"])
    sp.add_argument("--value", type=float, required=True)
    sp.add_argument("--scaled", action="store_true", help="value is given in scaled units")
    return p


_FLAG_KEYS = {"a_bar": "a_bar", "sigma0": "sigma0_bar", "xc": "xc_bar", "k0": "k0_bar",
              "families": "families", "times": "times", "detectors": "detectors",
              "quantiles": "quantiles", "t_max": "t_max", "t_final": "t_final",
              "out": "output_dir"}


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for flag, key in _FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            setattr(cfg, key, v)
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "units":
            try:
                raw, scaled = cmd_units(args.mass, args.hbar, args.quantity, args.value, args.scaled)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            print(f"{args.quantity} unscaled={fmt(raw)} scaled={fmt(scaled)}")
            return EXIT_OK
        cfg = config_from_args(args)
        start = time.perf_counter()
        if args.command == "validate":
            code, _ = cmd_validate(cfg, not args.skip_oracle)
            return code
        commands = {"density": cmd_density, "moments": cmd_moments,
                    "arrival": cmd_arrival, "trajectories": cmd_trajectories}
        paths = commands[args.command](cfg)
        for p in paths:
            print(p)
        print(f"# {args.command}: {len(paths)} files in {time.perf_counter() - start:.1f} s",
              file=sys.stderr)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QScatterError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
