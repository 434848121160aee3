"""Command-line entry point: verify targets, run refinement studies, list the catalog.

    equipart list
    equipart verify config.json [--output report.json] [--tol momentum=1e-9] [--seed 3]
    equipart converge config.json [--csv table.csv]
    equipart ac-system --example fourwell-a9

A config is a JSON object::

    {"target": "E3D_SOL1", "params": {...}, "grid": {"lo": [...], "hi": [...], "n": 21},
     "times": [0.5], "checks": ["momentum"], "refinement": [21, 41, 81],
     "tolerances": {"momentum": 1e-10}, "seed": 0}

The exit status is 0 exactly when every check passes.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .catalog import TARGETS, Context, ParameterError, Target, as_outcome, get_target
from .fields import Grid, ResidualReport, SaturatedResidualError, convergence_order

SCHEMA = 1
ORDER_TOL = {2: 0.15, 4: 0.3}
_CONFIG_KEYS = ("target", "params", "grid", "times", "checks", "refinement", "tolerances", "seed", "output")


class ConfigError(ValueError):
    """A config that cannot be run; the message names the offending field."""


# -- configuration ------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    target: str
    params: Mapping = field(default_factory=dict)
    grid: Mapping | None = None
    times: tuple[float, ...] | None = None
    checks: tuple[str, ...] = ()
    refinement: tuple[int, ...] | None = None
    tolerances: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0
    output: str | None = None

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "params": self.params,
            "grid": self.grid,
            "times": None if self.times is None else list(self.times),
            "checks": list(self.checks),
            "refinement": None if self.refinement is None else list(self.refinement),
            "tolerances": dict(self.tolerances),
            "seed": self.seed,
            "output": self.output,
        }


def _load_json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None


def parse_config(data: Mapping | str, source: str = "config", overrides: Mapping | None = None) -> RunConfig:
    """Validate a config mapping (or JSON text); unknown fields, targets,
    checks and tolerance names are rejected here, before anything runs."""
    if isinstance(data, str):
        data = _load_json(data, source)
    if not isinstance(data, Mapping):
        raise ConfigError(f"{source}: top level must be a JSON object")
    data = {**data, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    for key in data:
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{source}: unknown field {key!r}; allowed: {', '.join(_CONFIG_KEYS)}")
    if "target" not in data:
        raise ConfigError(f"{source}: missing field 'target'")
    tid = data["target"]
    if tid not in TARGETS:
        raise ConfigError(f"{source}: target: unknown id {tid!r}; run 'equipart list'")
    target = TARGETS[tid]

    params = data.get("params") or {}
    if not isinstance(params, Mapping):
        raise ConfigError(f"{source}: params must be an object")
    for key in params:
        if key not in target.params:
            raise ConfigError(f"{source}: params.{key}: not a parameter of {tid} ({', '.join(target.params) or 'none'})")

    checks = data.get("checks") or list(target.default_checks())
    if isinstance(checks, str) or not isinstance(checks, Sequence):
        raise ConfigError(f"{source}: checks must be a list")
    for i, c in enumerate(checks):
        if c not in target.checks:
            raise ConfigError(f"{source}: checks[{i}]: unknown check {c!r} for {tid}; known: {', '.join(target.checks)}")

    tols = dict(data.get("tolerances") or {})
    for name, v in tols.items():
        base = name[len("order:"):] if name.startswith("order:") else name
        if base not in target.checks:
            raise ConfigError(f"{source}: tolerances.{name}: no such check for {tid}")
        if not isinstance(v, (int, float)) or v < 0:
            raise ConfigError(f"{source}: tolerances.{name}: must be a non-negative number")

    grid = data.get("grid")
    if grid is not None:
        try:
            _grid_from(target, grid, None)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"{source}: grid: {e}") from None

    times = data.get("times")
    if times is not None:
        if not isinstance(times, Sequence) or not all(isinstance(t, (int, float)) for t in times):
            raise ConfigError(f"{source}: times must be a list of numbers")
        times = tuple(float(t) for t in times)

    ref = data.get("refinement")
    if ref is not None:
        if not isinstance(ref, Sequence) or not all(isinstance(n, int) and n >= 8 for n in ref):
            raise ConfigError(f"{source}: refinement must be a list of point counts >= 8")
        ref = tuple(ref)

    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"{source}: seed must be an integer")
    return RunConfig(tid, dict(params), grid, times, tuple(checks), ref, tols, seed, data.get("output"))


def load_config(path: str | Path, overrides: Mapping | None = None) -> RunConfig:
    return parse_config(Path(path).read_text(), str(path), overrides)


def _grid_from(target: Target, spec: Mapping | None, n: int | None) -> Grid:
    if spec is None:
        return target.grid(n if n is not None else target.default_n)
    base = target.grid(target.default_n)
    lo = tuple(spec.get("lo", base.lo))
    hi = tuple(spec.get("hi", base.hi))
    count = n if n is not None else spec.get("n", base.n)
    count = (count,) * len(lo) if isinstance(count, int) else tuple(count)
    periodic = tuple(spec.get("periodic", (False,) * len(lo)))
    return Grid(lo, hi, count, periodic)


# -- reports --------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    check: str
    passed: bool
    tol: float
    reports: tuple[ResidualReport, ...] = ()
    levels: tuple[dict, ...] = ()
    order: float | str | None = None
    nominal_order: int | None = None
    detail: Mapping = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "passed": self.passed,
            "tol": self.tol,
            "reports": [r.to_dict() for r in self.reports],
            "levels": list(self.levels),
            "order": self.order,
            "nominal_order": self.nominal_order,
            "detail": dict(self.detail),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CheckResult":
        return cls(d["check"], d["passed"], d["tol"], tuple(ResidualReport.from_dict(r) for r in d["reports"]),
                   tuple(d["levels"]), d["order"], d["nominal_order"], d["detail"], d["error"])


@dataclass(frozen=True)
class RunReport:
    mode: str
    config: Mapping
    target: Mapping
    checks: tuple[CheckResult, ...]
    constraints: tuple[Mapping, ...] = ()
    flags: Mapping = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = __version__
    schema: int = SCHEMA

    @property
    def passed(self) -> bool:
        return not self.constraints and bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "schema": self.schema,
            "library": {"name": "equipart", "version": self.version},
            "mode": self.mode,
            "config": dict(self.config),
            "target": dict(self.target),
            "constraints": [dict(c) for c in self.constraints],
            "checks": [c.to_dict() for c in self.checks],
            "flags": dict(self.flags),
            "passed": self.passed,
        }
        if timing:
            d["timing"] = {"wall_time": self.wall_time}
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunReport":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(d["mode"], d["config"], d["target"], tuple(CheckResult.from_dict(c) for c in d["checks"]),
                   tuple(d["constraints"]), d["flags"], d.get("timing", {}).get("wall_time", 0.0),
                   d["library"]["version"], d["schema"])

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


# -- running ------------------------------------------------------------------------------

def _build(target: Target, cfg: RunConfig):
    rng = np.random.default_rng(cfg.seed)
    try:
        return target.build(cfg.params, rng), ()
    except ParameterError as e:
        return None, tuple(e.violations)


def _run_check(target: Target, name: str, ctx: Context, tol: float) -> CheckResult:
    try:
        out = as_outcome(target.checks[name].run(ctx))
    except Exception as e:  # failures are report entries, not crashes
        return CheckResult(name, False, tol, error=f"{type(e).__name__}: {e}")
    ok = all(r.linf <= tol for r in out.reports)
    if out.passed is not None:
        ok = out.passed
    return CheckResult(name, ok, tol, out.reports, detail=out.detail)


def _target_echo(target: Target) -> dict:
    return {"id": target.id, "citation": target.citation, "kind": target.kind}


def _failed_constraints(mode, cfg, target, violations, started) -> RunReport:
    checks = tuple(CheckResult(c, False, _tol(target, cfg, c), error="skipped: constraint violation")
                   for c in cfg.checks)
    return RunReport(mode, cfg.to_dict(), _target_echo(target), checks, violations, dict(target.flags),
                     time.perf_counter() - started)


def _tol(target: Target, cfg: RunConfig, name: str) -> float:
    return float(cfg.tolerances.get(name, target.checks[name].tol))


def run_verify(cfg: RunConfig) -> RunReport:
    started = time.perf_counter()
    target = get_target(cfg.target)
    obj, violations = _build(target, cfg)
    if violations:
        return _failed_constraints("verify", cfg, target, violations, started)
    ctx = Context(obj, _grid_from(target, cfg.grid, None), cfg.times or target.times)
    results = tuple(_run_check(target, c, ctx, _tol(target, cfg, c)) for c in cfg.checks)
    return RunReport("verify", cfg.to_dict(), _target_echo(target), results, (), dict(target.flags),
                     time.perf_counter() - started)


def run_converge(cfg: RunConfig) -> RunReport:
    """Run each check at every refinement level and fit the convergence slope.

    Checks with a sampled path run on it; the slope must be within
    ``ORDER_TOL`` of the nominal stencil order.  Analytic-only checks are
    expected to sit at the rounding floor ("saturated").
    """
    started = time.perf_counter()
    target = get_target(cfg.target)
    levels = cfg.refinement
    if not levels or len(levels) < 3:
        raise ConfigError("converge needs 'refinement' with at least 3 levels")
    obj, violations = _build(target, cfg)
    if violations:
        return _failed_constraints("converge", cfg, target, violations, started)
    results = []
    for name in cfg.checks:
        check = target.checks[name]
        tol = _tol(target, cfg, name)
        path = "fd" if check.fd_order else "analytic"
        rows, error = [], None
        for n in levels:
            grid = _grid_from(target, cfg.grid, n)
            r = _run_check(target, name, Context(obj, grid, cfg.times or target.times, path), tol)
            if r.error:
                error = r.error
                break
            linf = max(rep.linf for rep in r.reports)
            rows.append({"n": n, "h": grid.h_max, "linf": linf, "l2": max(rep.l2 for rep in r.reports)})
        if error:
            results.append(CheckResult(name, False, tol, error=error))
            continue
        try:
            order = convergence_order([(row["h"], row["linf"]) for row in rows])
        except SaturatedResidualError:
            order = "saturated"
        if check.fd_order:
            otol = float(cfg.tolerances.get(f"order:{name}", ORDER_TOL.get(check.fd_order, 0.3)))
            ok = order == "saturated" or abs(order - check.fd_order) <= otol
            detail = {"order_tol": otol}
        else:
            ok = all(row["linf"] <= tol for row in rows)
            detail = {}
        results.append(CheckResult(name, ok, tol, (), tuple(rows), order, check.fd_order, detail))
    return RunReport("converge", cfg.to_dict(), _target_echo(target), tuple(results), (), dict(target.flags),
                     time.perf_counter() - started)


def run_list() -> list[dict]:
    return [
        {"id": t.id, "citation": t.citation, "kind": t.kind, "params": list(t.params), "checks": list(t.checks)}
        for t in TARGETS.values()
    ]


def write_csv(report: RunReport, path: str | Path) -> None:
    """Residual-vs-h table of a convergence report."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "n", "h", "linf", "l2", "order"])
        for c in report.checks:
            for row in c.levels:
                w.writerow([c.check, row["n"], repr(row["h"]), repr(row["linf"]), repr(row["l2"]), c.order])


# -- argument parsing ------------------------------------------------------------------

def _parse_tol(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {name!r}: {value!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="write the JSON report here instead of stdout")
    common.add_argument("--tol", action="append", type=_parse_tol, default=[], metavar="NAME=VALUE",
                        help="override a check tolerance (repeatable)")
    common.add_argument("--seed", type=int, help="seed for randomised parameters")
    common.add_argument("--no-timing", action="store_true", help="omit the wall-time field")

    p = argparse.ArgumentParser(prog="equipart", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"equipart {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="run the checks of a config")
    v.add_argument("config")
    c = sub.add_parser("converge", parents=[common], help="refinement study of a config")
    c.add_argument("config")
    c.add_argument("--csv", help="also write a residual-vs-h table")
    sub.add_parser("list", help="list every target with its citation and parameters")
    a = sub.add_parser("ac-system", parents=[common], help="verify a vector Allen-Cahn catalog example")
    a.add_argument("--example", required=True)
    a.add_argument("--checks", nargs="+", help="subset of checks")
    return p


def _emit(report: RunReport, args) -> None:
    text = report.to_json(timing=not args.no_timing)
    out = args.output or report.config.get("output")
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list":
        for e in run_list():
            params = ", ".join(e["params"]) or "none"
            print(f"{e['id']} — {e['citation']} [params: {params}; checks: {', '.join(e['checks'])}]")
        return 0
    overrides = {"seed": args.seed}
    try:
        if args.command == "ac-system":
            cfg = parse_config({"target": args.example, "checks": args.checks}, "ac-system", overrides)
        else:
            cfg = load_config(args.config, overrides)
        if args.tol:
            tols = {**cfg.tolerances, **dict(args.tol)}
            cfg = parse_config({**cfg.to_dict(), "tolerances": tols}, "--tol")
        report = run_converge(cfg) if args.command == "converge" else run_verify(cfg)
    except (ConfigError, OSError) as e:
        parser.exit(2, f"equipart: error: {e}\n")
    _emit(report, args)
    if args.command == "converge" and args.csv:
        write_csv(report, args.csv)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
