"""Command-line interface.

Exit codes: 0 success, 2 config/usage, 3 solver failure, 4 I/O, 5 tolerance.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from . import __version__
from .calib import (
    PARAM_UNITS,
    ParseError,
    fit_parameters,
    group_cycles,
    load_bending_csv,
    records_to_csv,
    synthetic_records,
)
from .core import (
    MM,
    ConfigError,
    DomainError,
    MechanismConfig,
    load_config,
    prototype_default_config,
    validate_config,
)
from .design import (
    SWEEP_AXES,
    HeadModel,
    NonMonotoneResponse,
    search_spring_for_target,
    sweep,
)
from .mechanism import (
    ConstraintInfeasible,
    SolidLengthError,
    assistive_moment,
    curve_to_csv,
    curve_to_json,
    moment_deflection_curve,
)
from .oracle import ShootingError, oracle_assistive_moment, relative_deviation

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO, EXIT_TOLERANCE = 0, 2, 3, 4, 5
SOLVER_ERRORS = (ConstraintInfeasible, SolidLengthError, ShootingError, NonMonotoneResponse, ArithmeticError)


class CliExit(Exception):
    def __init__(self, code: int, message: str = ""):
        self.code = code
        self.message = message
        super().__init__(message)


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    output_paths: list[str] = field(default_factory=list)
    tool_version: str = __version__
    timestamp: str = ""


# --- helpers ----------------------------------------------------------------


def _config(args) -> MechanismConfig:
    path = args.config
    try:
        cfg = prototype_default_config() if path is None else load_config(path)
        return validate_config(cfg)
    except FileNotFoundError:
        raise CliExit(EXIT_USAGE, f"config file not found: {path}") from None
    except ConfigError as exc:
        raise CliExit(EXIT_USAGE, json.dumps({"errors": [str(i) for i in exc.issues]})) from None


def _with_preload(cfg: MechanismConfig, preload_mm: float | None) -> MechanismConfig:
    if preload_mm is None:
        return cfg
    try:
        return validate_config(cfg.with_values(preload=preload_mm * MM))
    except ConfigError as exc:
        raise CliExit(EXIT_USAGE, json.dumps({"errors": [str(i) for i in exc.issues]})) from None


def _emit(text: str, args, manifest: RunManifest, suffix: str = "") -> None:
    out = args.out
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    path = Path(out) if not suffix else Path(out).with_name(Path(out).stem + suffix + Path(out).suffix)
    try:
        path.write_text(text if text.endswith("\n") else text + "\n")
    except OSError as exc:
        raise CliExit(EXIT_IO, f"cannot write {path}: {exc}") from None
    manifest.output_paths.append(str(path))


def _write_manifest(args, manifest: RunManifest) -> None:
    if args.out is None or not manifest.output_paths:
        return
    manifest.timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path = Path(args.out).with_name(Path(args.out).name + ".manifest.json")
    try:
        path.write_text(json.dumps(asdict(manifest), indent=2) + "\n")
    except OSError as exc:
        raise CliExit(EXIT_IO, f"cannot write {path}: {exc}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _theta_grid(text: str) -> list[float]:
    """``start:stop:n`` (inclusive, degrees) or a comma list of degrees."""
    if ":" in text:
        try:
            a, b, n = text.split(":")
            n = int(n)
            a, b = float(a), float(b)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
        if n < 1:
            raise argparse.ArgumentTypeError("grid needs at least one point")
        return [a + (b - a) * k / (n - 1) for k in range(n)] if n > 1 else [a]
    return _float_list(text)


def _head(args, theta_deg: float) -> HeadModel:
    incl = args.inclination_deg if args.inclination_deg is not None else theta_deg
    lever = None if args.head_lever_mm is None else args.head_lever_mm * MM
    try:
        return HeadModel(mass=args.head_mass_kg, inclination=math.radians(incl), lever_arm=lever)
    except DomainError as exc:
        raise CliExit(EXIT_USAGE, str(exc)) from None


# --- commands ---------------------------------------------------------------


def cmd_validate(args, manifest: RunManifest) -> int:
    _config(args)
    _emit(json.dumps({"valid": True}), args, manifest)
    return EXIT_OK


def cmd_simulate(args, manifest: RunManifest) -> int:
    cfg = _with_preload(_config(args), args.preload_mm)
    b = assistive_moment(math.radians(args.theta_deg), cfg)
    _emit(json.dumps(b.to_dict(), indent=2), args, manifest)
    return EXIT_OK


def cmd_curve(args, manifest: RunManifest) -> int:
    base = _config(args)
    preloads = args.preload_mm if args.preload_mm else [None]
    curve = []
    for p in preloads:
        cfg = _with_preload(base, p)
        curve.extend(moment_deflection_curve(cfg, math.radians(args.theta_max_deg), args.points))
    text = curve_to_json(curve) if args.format == "json" else curve_to_csv(curve)
    _emit(text, args, manifest)
    return EXIT_OK


def cmd_oracle_check(args, manifest: RunManifest) -> int:
    cfg = _with_preload(_config(args), args.preload_mm)
    lines = ["theta_rad,m_closed_nm,m_oracle_nm,rel_dev"]
    worst = 0.0
    for deg in args.theta_grid:
        th = math.radians(deg)
        closed = assistive_moment(th, cfg).moment_assist
        ref = oracle_assistive_moment(th, cfg, n_steps=args.steps).moment_assist
        dev = relative_deviation(closed, ref)
        worst = max(worst, dev)
        lines.append(f"{th!r},{closed!r},{ref!r},{dev!r}")
    _emit("\n".join(lines), args, manifest)
    ok = worst <= args.tolerance
    sys.stderr.write(
        f"max rel_dev={worst:.6e} tolerance={args.tolerance:.6e} {'PASS' if ok else 'FAIL'}\n"
    )
    return EXIT_OK if ok else EXIT_TOLERANCE


def _parse_bounds(items: list[str]) -> dict[str, tuple[float, float]]:
    out = {}
    for item in items:
        try:
            name, rng = item.split("=")
            lo, hi = (float(v) for v in rng.split(":"))
        except ValueError:
            raise CliExit(EXIT_USAGE, f"bad bound {item!r}; expected NAME=LO:HI") from None
        if name not in PARAM_UNITS:
            raise CliExit(EXIT_USAGE, f"unknown parameter {name!r}")
        scale = PARAM_UNITS[name][1]
        out[name] = (lo * scale, hi * scale)
    return out


def cmd_fit(args, manifest: RunManifest) -> int:
    cfg = _config(args)
    free = [f for f in args.free.split(",") if f]
    bounds = _parse_bounds(args.bounds)
    missing = [f for f in free if f not in bounds]
    if missing:
        raise CliExit(EXIT_USAGE, f"no bounds given for {', '.join(missing)}")
    try:
        records = load_bending_csv(args.data)
    except ParseError as exc:
        raise CliExit(EXIT_IO, f"{args.data}: {exc}") from None
    try:
        result = fit_parameters(
            group_cycles(records), free, bounds, cfg, args.lever_mm * MM, seed=args.seed
        )
    except DomainError as exc:
        raise CliExit(EXIT_USAGE, str(exc)) from None
    _emit(json.dumps(result.report(), indent=2), args, manifest)
    return EXIT_OK


def cmd_synth(args, manifest: RunManifest) -> int:
    cfg = _with_preload(_config(args), args.preload_mm)
    recs = synthetic_records(
        cfg, args.lever_mm * MM, n_cycles=args.cycles, noise=args.noise, seed=args.seed
    )
    _emit(records_to_csv(recs), args, manifest)
    return EXIT_OK


def _parse_axes(items: list[str]) -> dict[str, list[float]]:
    axes: dict[str, list[float]] = {}
    for item in items:
        try:
            name, vals = item.split("=")
            values = [float(v) for v in vals.split(",") if v.strip()]
        except ValueError:
            raise CliExit(EXIT_USAGE, f"bad axis {item!r}; expected NAME=v1,v2,...") from None
        if name not in SWEEP_AXES:
            raise CliExit(EXIT_USAGE, f"unknown axis {name!r}; choose from {', '.join(SWEEP_AXES)}")
        axes[name] = [v * SWEEP_AXES[name][1] for v in values]
    return axes


def cmd_sweep(args, manifest: RunManifest) -> int:
    cfg = _config(args)
    axes = _parse_axes(args.axis)
    if not axes:
        raise CliExit(EXIT_USAGE, "give at least one --axis")
    try:
        table = sweep(cfg, axes, _head(args, args.theta_deg), math.radians(args.theta_deg))
    except DomainError as exc:
        raise CliExit(EXIT_USAGE, str(exc)) from None
    if args.format == "json":
        rows = [dict(c.params, **{k: getattr(c, k) for k in
                ("m_assist", "f_assist", "comp_frac", "spring_frac", "stiffness", "status")})
                for c in table.cells]
        _emit(json.dumps(rows, indent=2), args, manifest)
    else:
        _emit(table.to_csv(), args, manifest)
    return EXIT_OK


def cmd_design_target(args, manifest: RunManifest) -> int:
    cfg = _with_preload(_config(args), args.preload_mm)
    try:
        res = search_spring_for_target(
            cfg,
            _head(args, args.theta_deg),
            math.radians(args.theta_deg),
            args.target,
            k_max=args.k_max_n_per_mm * 1e3,
        )
    except DomainError as exc:
        raise CliExit(EXIT_USAGE, str(exc)) from None
    _emit(json.dumps(res.report(), indent=2), args, manifest)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML config (default: shipped prototype)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)

    head = argparse.ArgumentParser(add_help=False)
    head.add_argument("--head-mass-kg", type=float, default=5.0)
    head.add_argument("--inclination-deg", type=float, default=None, help="default: --theta-deg")
    head.add_argument("--head-lever-mm", type=float, default=None, help="default: config lever arm")
    head.add_argument("--theta-deg", type=float, default=16.0)

    p = argparse.ArgumentParser(prog="flexmech", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="check a config file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", parents=[common], help="moment breakdown at one angle (JSON)")
    s.add_argument("--theta-deg", type=float, required=True)
    s.add_argument("--preload-mm", type=float, default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("curve", parents=[common], help="moment-deflection curve(s)")
    s.add_argument("--theta-max-deg", type=float, default=16.0)
    s.add_argument("--points", type=int, default=17)
    s.add_argument("--preload-mm", type=float, nargs="+", default=None)
    s.set_defaults(func=cmd_curve)

    s = sub.add_parser("oracle-check", parents=[common], help="closed form vs shooting oracle")
    s.add_argument("--theta-grid", type=_theta_grid, default=_theta_grid("2:16:10"),
                   help="degrees, START:STOP:N or a comma list")
    s.add_argument("--tolerance", type=float, default=0.01)
    s.add_argument("--steps", type=int, default=400)
    s.add_argument("--preload-mm", type=float, default=None)
    s.set_defaults(func=cmd_oracle_check)

    s = sub.add_parser("fit", parents=[common], help="fit model parameters to bending-test CSV")
    s.add_argument("data")
    s.add_argument("--free", default="E", help="comma list from E,K,Sep,ecc")
    s.add_argument("--bounds", action="append", default=[],
                   help="NAME=LO:HI in config units (E GPa, K N/mm, Sep/ecc mm); repeatable")
    s.add_argument("--lever-mm", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("synth", parents=[common], help="synthetic bending-test CSV from the model")
    s.add_argument("--lever-mm", type=float, required=True)
    s.add_argument("--preload-mm", type=float, default=None)
    s.add_argument("--cycles", type=int, default=3)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("sweep", parents=[common, head], help="grid over design parameters")
    s.add_argument("--axis", action="append", default=[],
                   help="NAME=v1,v2 with NAME in K (N/mm), preload, Sep, diameter (mm), E (GPa)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("design-target", parents=[common, head], help="spring constant for a target compensation")
    s.add_argument("--target", type=float, required=True, help="fraction of the head weight component")
    s.add_argument("--k-max-n-per-mm", type=float, default=20.0)
    s.add_argument("--preload-mm", type=float, default=None)
    s.set_defaults(func=cmd_design_target)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    manifest = RunManifest(command=args.command, config_path=args.config)
    func: Callable = args.func
    try:
        code = func(args, manifest)
        _write_manifest(args, manifest)
        return code
    except CliExit as exc:
        if exc.message:
            sys.stderr.write(exc.message + "\n")
        return exc.code
    except SOLVER_ERRORS as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER
    except DomainError as exc:
        sys.stderr.write(f"invalid input: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
