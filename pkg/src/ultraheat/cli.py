"""Command line interface: ``ultraheat <command> ...``.

Exit codes: 0 success, 1 failed checks, 2 configuration or input errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from .tower import DEFAULT_ENUM_CAP, Tower, TowerError, build_tower

DEFAULT_TOWER = {"p": 2, "precision": 24,
                 "steps": [{"type": "unramified", "degree": 2},
                           {"type": "unramified", "degree": 3}]}

CONFIG_KEYS = {"tower", "alpha", "t", "seed", "enum_cap", "outputs"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    tower: dict = field(default_factory=lambda: dict(DEFAULT_TOWER))
    alpha: float = 1.0
    t: float = 1.0
    seed: int = 0
    enum_cap: int = DEFAULT_ENUM_CAP
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        cfg = cls()
        if "tower" in data:
            cfg.tower = data["tower"]
        try:
            cfg.alpha = float(data.get("alpha", cfg.alpha))
            cfg.t = float(data.get("t", cfg.t))
            cfg.seed = int(data.get("seed", cfg.seed))
            cfg.enum_cap = int(data.get("enum_cap", cfg.enum_cap))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad numeric value: {exc}") from exc
        cfg.outputs = data.get("outputs", {})
        cfg.validate()
        return cfg

    def validate(self):
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not self.t > 0:
            raise ConfigError("t must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.enum_cap < 1:
            raise ConfigError("enum_cap must be positive")
        if not isinstance(self.outputs, dict) or not all(
                isinstance(k, str) and isinstance(v, str) for k, v in self.outputs.items()):
            raise ConfigError("outputs must map names to paths")
        try:
            self.build()
        except (TowerError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid tower: {exc}") from exc

    def build(self) -> Tower:
        return build_tower(self.tower, enum_cap=self.enum_cap)


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(data)


def _fmt(x: float) -> str:
    return f"{x:.15g}"


def _round(x):
    if isinstance(x, complex):
        return [float(_fmt(x.real)), float(_fmt(x.imag))]
    if isinstance(x, float):
        return float(_fmt(x))
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_round(v) for v in x]
    return x


def _emit(obj, fmt: str, out=None, csv_rows=None):
    out = out or sys.stdout
    if fmt == "csv" and csv_rows is not None:
        w = csv.writer(out, lineterminator="\n")
        for row in csv_rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    else:
        out.write(json.dumps(_round(obj)) + "\n")


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _load_function(tower: Tower, path: str):
    from .measure import CylindricalFunction

    data = _read_json(path)
    try:
        return CylindricalFunction.from_dict(tower, data)
    except (KeyError, TypeError, ValueError, TowerError) as exc:
        raise ConfigError(f"{path} is not a cylindrical function for this tower: {exc}") from exc


def _values_rows(values):
    rows = [("index", "re", "im")]
    rows += [(i, float(v.real), float(v.imag)) for i, v in enumerate(values)]
    return rows


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_verify(args, cfg: RunConfig) -> int:
    from .verify import SUITES, run_suites

    suites = args.suite or list(SUITES)
    try:
        records = run_suites(cfg.build(), suites, cfg.alpha, cfg.t, cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    failed = [r for r in records if r["status"] != "pass"]
    report = {"tower": cfg.tower, "suites": suites, "passed": len(records) - len(failed),
              "failed": len(failed), "cases": records}
    if args.emit == "csv":
        rows = [("suite", "case", "status", "lhs", "rhs", "tol")]
        rows += [(r["suite"], r["case"], r["status"], json.dumps(r["lhs"]), json.dumps(r["rhs"]),
                  r["tol"]) for r in records]
        _emit(None, "csv", csv_rows=rows)
    else:
        _emit(report, "json")
    out = cfg.outputs.get("verify")
    if out:
        with open(out, "w") as fh:
            fh.write(json.dumps(_round(report), indent=1) + "\n")
    return 1 if failed else 0


def cmd_integrate(args, cfg: RunConfig) -> int:
    from .measure import integrate_mu

    f = _load_function(cfg.build(), args.f)
    val = integrate_mu(f)
    _emit({"level": f.n, "integral": complex(val)}, args.emit,
          csv_rows=[("level", "re", "im"), (f.n, float(val.real), float(val.imag))])
    return 0


def cmd_fourier(args, cfg: RunConfig) -> int:
    from .spectral import fhat

    f = _load_function(cfg.build(), args.f)
    F = fhat(f, args.nu or f.n)
    _write_or_emit(F.to_dict(), F.values, args)
    return 0


def _write_or_emit(obj, values, args):
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(json.dumps(_round(obj)) + "\n")
    else:
        _emit(obj, args.emit, csv_rows=_values_rows(values))


def cmd_dalpha(args, cfg: RunConfig) -> int:
    from .fractional import dalpha_hypersingular, dalpha_spectral

    f = _load_function(cfg.build(), args.f)
    alpha = cfg.alpha if args.alpha is None else args.alpha
    if args.method == "hypersingular":
        g = dalpha_hypersingular(f, alpha)
    else:
        g = dalpha_spectral(f, alpha)
    out = g.to_dict()
    # eigenrelation D f = lam f when it holds on every coset
    fv, gv = f.values, g.values
    nz = np.abs(fv) > 1e-12
    if np.any(nz):
        lam = complex(np.vdot(fv, gv) / np.vdot(fv, fv))
        if np.max(np.abs(gv - lam * fv)) < 1e-9:
            out["eigenvalue"] = lam
    _write_or_emit(out, g.values, args)
    return 0


def cmd_heat_kernel(args, cfg: RunConfig) -> int:
    from .heat import pi_sphere_probs

    tower = cfg.build()
    lv = tower.level(args.level)
    alpha = cfg.alpha if args.alpha is None else args.alpha
    t = cfg.t if args.t is None else args.t
    if not (alpha > 0 and t > 0):
        raise ConfigError("alpha and t must be positive")
    nmin = lv.d - args.shells if args.nmin is None else args.nmin
    prof = pi_sphere_probs(lv, t, alpha, nmin)
    rows = [("N", "gamma", "sphere_prob")]
    rows += [(N, prof.gamma[N], prof.probs[N]) for N in sorted(prof.probs, reverse=True)]
    obj = {"level": lv.n, "alpha": alpha, "t": t, "n_min": prof.n_min,
           "floor_mass": prof.floor_mass,
           "rows": [{"N": N, "gamma": g, "sphere_prob": p} for N, g, p in rows[1:]]}
    fmt = "json" if args.emit == "json" else "csv"
    _emit(obj, fmt, csv_rows=rows)
    return 0


def cmd_heat_apply(args, cfg: RunConfig) -> int:
    from .heat import heat_apply

    f = _load_function(cfg.build(), args.f)
    alpha = cfg.alpha if args.alpha is None else args.alpha
    t = cfg.t if args.t is None else args.t
    g = heat_apply(f, t, alpha)
    _write_or_emit(g.to_dict(), g.values, args)
    return 0


def cmd_fa(args, cfg: RunConfig) -> int:
    from fractions import Fraction

    from .measure import CylindricalFunction

    tower = cfg.build()
    lv = tower.level(args.level)
    coords = [Fraction(c) for c in args.coeffs.split(",")]
    if len(coords) != lv.m:
        raise ConfigError(f"level {lv.n} needs {lv.m} coordinates")
    f = CylindricalFunction.fa(lv.element(coords))
    _write_or_emit(f.to_dict(), f.values, args)
    return 0


def cmd_simulate(args, cfg: RunConfig) -> int:
    from .heat import pi_sphere_probs
    from .lattice import ord_rows
    from .measure import TruncatedPoint
    from .process import parse_grid, simulate_paths

    tower = cfg.build()
    lv = tower.level(args.level)
    alpha = cfg.alpha if args.alpha is None else args.alpha
    seed = cfg.seed if args.seed is None else args.seed
    try:
        grid = parse_grid(args.grid)
    except ValueError as exc:
        raise ConfigError(f"bad grid: {exc}") from exc
    x0 = lv.zero()
    if args.x0:
        data = _read_json(args.x0)
        try:
            x0 = TruncatedPoint.from_dict(tower, data).coord(lv.n)
        except (KeyError, TypeError, ValueError, TowerError) as exc:
            raise ConfigError(f"bad starting point: {exc}") from exc
    try:
        paths = simulate_paths(lv, grid, x0, alpha, args.paths, seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = args.out or cfg.outputs.get("paths", "paths.jsonl")
    with open(out, "w") as fh:
        for pth in paths:
            fh.write(json.dumps(pth.to_dict()) + "\n")
    # shell summary of increments over the most common step
    dts = np.round(np.diff(grid), 12)
    vals, counts = np.unique(dts, return_counts=True)
    dt = float(vals[np.argmax(counts)])
    idx = np.nonzero(dts == dt)[0]
    prof = pi_sphere_probs(lv, dt, alpha)
    shift_m = 0
    mm = lv.m
    while mm % lv.p == 0:
        mm //= lv.p
        shift_m += 1
    shells = []
    for pth in paths:
        inc = (pth.rows[idx + 1].astype(object) - pth.rows[idx].astype(object)) % (
            lv.p ** (pth.shift + tower.M))
        o = ord_rows(lv, inc, pth.shift)
        shells.append(-(o - lv.e * shift_m))
    shells = np.concatenate(shells) if shells else np.array([])
    total = max(1, shells.size)
    rows = [("N", "empirical", "exact")]
    for N in sorted(prof.probs, reverse=True)[:12]:
        rows.append((N, float(np.sum(shells == N)) / total, prof.probs[N]))
    summary = args.summary or cfg.outputs.get("summary")
    if summary:
        with open(summary, "w") as fh:
            _emit(None, "csv", out=fh, csv_rows=rows)
    report = {"paths": len(paths), "steps": int(grid.size - 1), "out": out, "dt": dt,
              "shells": [{"N": r[0], "empirical": r[1], "exact": r[2]} for r in rows[1:]]}
    _emit(report, args.emit, csv_rows=rows)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="RunConfig JSON (tower, alpha, t, seed, enum_cap, outputs)")
    common.add_argument("--emit", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(prog="ultraheat", parents=[common],
                                     description="Heat equation and process on a tower of local fields")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run the property suites")
    p.add_argument("--suite", action="append", help="restrict to a suite (repeatable)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("integrate", parents=[common], help="integral against the measure")
    p.add_argument("--f", required=True, help="CylindricalFunction JSON")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("fourier", parents=[common], help="transform of a cylindrical function")
    p.add_argument("--f", required=True)
    p.add_argument("--nu", type=int, default=None, help="evaluation level (default: level of f)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fourier)

    p = sub.add_parser("dalpha", parents=[common], help="fractional operator")
    p.add_argument("--f", required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--method", choices=("spectral", "hypersingular"), default="spectral")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dalpha)

    p = sub.add_parser("heat", parents=[common], help="heat kernel and semigroup")
    hsub = p.add_subparsers(dest="heat_command", required=True)
    k = hsub.add_parser("kernel", parents=[common], help="radial kernel as CSV rows")
    k.add_argument("--level", type=int, required=True)
    k.add_argument("--alpha", type=float, default=None)
    k.add_argument("--t", type=float, default=None)
    k.add_argument("--shells", type=int, default=12, help="number of shells below the top")
    k.add_argument("--nmin", type=int, default=None, help="floor shell (overrides --shells)")
    k.set_defaults(func=cmd_heat_kernel, emit_default="csv")
    a = hsub.add_parser("apply", parents=[common], help="apply U_t to a cylindrical function")
    a.add_argument("--f", required=True)
    a.add_argument("--alpha", type=float, default=None)
    a.add_argument("--t", type=float, default=None)
    a.add_argument("--out")
    a.set_defaults(func=cmd_heat_apply)

    p = sub.add_parser("fa", parents=[common], help="write the character x -> chi(<a, x>)")
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--coeffs", required=True, help="comma separated rational coordinates of a")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fa)

    p = sub.add_parser("simulate", parents=[common], help="sample paths of the process")
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--grid", default="0:0.01:1")
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--x0", help="TruncatedPoint JSON (default: 0)")
    p.add_argument("--out")
    p.add_argument("--summary", help="CSV of empirical vs exact shell frequencies")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    # heat kernel output is tabular: CSV unless JSON was asked for explicitly
    if getattr(args, "emit_default", None) == "csv" and "--emit" not in argv:
        args.emit = "csv"
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"ultraheat: error: {exc}", file=sys.stderr)
        return 2
    except (TowerError, FileNotFoundError) as exc:
        print(f"ultraheat: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
