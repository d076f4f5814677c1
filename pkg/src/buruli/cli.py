"""Command line entry point: ``buruli run|compare|lattice|validate``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import re
import sys
import time
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from . import lattice
from .config import ConfigError, RunConfig, load_config, parse_config
from .discretization import ModelKind
from .grid import FIELD_NAMES, Grid, State
from .output import (
    build_manifest,
    read_field_csv,
    snapshot_prefix,
    summary_row,
    write_diff_report,
    write_error_table,
    write_manifest,
    write_snapshot,
    write_summary,
)
from .scenarios import StateDiff, build_initial_state, compare_runs
from .stepper import InvariantError, RunStats, SolverError, iter_run

log = logging.getLogger("buruli")


class OutputDirInUse(RuntimeError):
    pass


def claim_output_dir(path) -> Path:
    """Create ``path`` and mark it as owned by this run; two runs can never
    share a directory."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    try:
        with open(path / ".claimed", "x") as fh:
            fh.write(f"{time.time()}\n")
    except FileExistsError:
        raise OutputDirInUse(f"{path} already holds a run; choose a fresh --out") from None
    return path


def _parse_grid(text: str) -> Grid:
    m = re.fullmatch(r"(\d+)(?:[xX](\d+))?", text.strip())
    if not m:
        raise argparse.ArgumentTypeError(f"grid must look like 100 or 100x80, got {text!r}")
    nx = int(m.group(1))
    return Grid(nx, int(m.group(2) or nx))


def _parse_times(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"snapshots must be comma separated numbers: {text!r}")


def resolve_config(args) -> RunConfig:
    """Config file (or defaults) with command line flags applied on top."""
    cfg = load_config(args.config) if args.config else parse_config("")
    scenario = getattr(args, "scenario", None)
    if scenario and scenario != cfg.scenario.id:
        sid, _, model = scenario.partition(":")
        text = Path(args.config).read_text() if args.config else ""
        cfg = _with_scenario(text, sid, model or None)
    spec = cfg.scenario
    if args.seed is not None:
        spec = spec.replace(rng_seed=args.seed)
    if args.snapshots is not None:
        spec = spec.replace(snapshots=args.snapshots)
    if getattr(args, "horizon", None) is not None:
        snaps = tuple(t for t in spec.snapshots if t <= args.horizon)
        spec = spec.replace(horizon=args.horizon, snapshots=snaps)
    if getattr(args, "model", None):
        spec = spec.replace(model=args.model)
    cfg = cfg.replace(scenario=spec)
    if args.grid is not None:
        cfg = cfg.replace(grid=args.grid)
    if args.dt is not None:
        cfg = cfg.replace(stepper=cfg.stepper.replace(dt=None if args.dt <= 0 else args.dt))
    if getattr(args, "out", None):
        cfg = cfg.replace(output=_replace_out(cfg, args.out))
    return cfg


def _replace_out(cfg: RunConfig, out):
    return dataclasses.replace(cfg.output, dir=str(out))


def _with_scenario(text: str, sid: str, model: str | None) -> RunConfig:
    """Re-parse ``text`` with a different scenario id (and model)."""
    raw = tomli.loads(text) if text else {}
    sc = raw.setdefault("scenario", {})
    sc["id"] = sid
    if model:
        sc["model"] = model
    return parse_config(_dump_toml(raw))


def _dump_toml(raw: dict) -> str:
    lines = []
    for section, body in raw.items():
        lines.append(f"[{section}]")
        for k, v in body.items():
            lines.append(f"{k} = {json.dumps(v)}")
    return "\n".join(lines) + "\n"


def execute(cfg: RunConfig, out: Path | None, write_fields: bool = True
            ) -> tuple[dict, list[State]]:
    """Run one configured scenario; write artifacts to ``out`` if given.

    Returns the manifest and the snapshot states (initial state first).  Snapshots reached before an invariant breach are
    kept and the manifest is marked invalid.
    """
    spec = cfg.scenario
    p = cfg.nondim()
    initial = build_initial_state(spec.ic, cfg.grid, spec.rng_seed)
    stats = RunStats()
    states = [initial]
    breach = None
    if out is not None and write_fields:
        write_snapshot(initial, snapshot_prefix(out, 0.0), cfg.output.fields, cfg.output.raster)
    t0 = time.perf_counter()
    try:
        for state in iter_run(initial, spec.model, p, cfg.stepper, spec.horizon, spec.snapshots,
                              stats):
            states.append(state)
            log.info("t=%g  int u=%.6g  max m=%.4g", state.t, summary_row(state)["int_u"],
                     float(np.max(state.m)))
            if out is not None and write_fields:
                write_snapshot(state, snapshot_prefix(out, state.t), cfg.output.fields,
                               cfg.output.raster)
    except InvariantError as exc:
        breach = exc.as_dict()
        log.error("%s", exc)
    except SolverError as exc:
        breach = {"kind": "linear solve", "message": str(exc), "residual": exc.residual}
        log.error("%s", exc)
    log.info("integration took %.2f s over %d steps", time.perf_counter() - t0, stats.steps)

    monotone_v = all(bool(np.all(b.v <= a.v)) for a, b in zip(states, states[1:]))
    invariants = stats.invariant_report(cfg.stepper.negativity_tol)
    invariants.append(dict(name="tissue nonincreasing", observed=None, limit=None,
                           passed=monotone_v))
    manifest = build_manifest(
        config_hash=cfg.digest(),
        seed=spec.rng_seed,
        grid=cfg.grid,
        dt_used={"requested": cfg.stepper.dt, "min": stats.dt_min, "max": stats.dt_max,
                 "steps": stats.steps},
        version=__version__,
        invariants=invariants,
        breach=breach,
        extra={"scenario": spec.id, "model": spec.model.value,
               "snapshots": [s.t for s in states]},
    )
    if out is not None:
        write_summary(states, out / "summary.csv")
        (out / "config.json").write_text(json.dumps(cfg.as_dict(), indent=2, sort_keys=True) + "\n")
        write_manifest(manifest, out / "manifest.json")
    return manifest, states


def read_run(directory) -> list[State]:
    """Snapshot states saved by ``run`` in ``directory``, in time order."""
    directory = Path(directory)
    by_t: dict[str, dict[str, Path]] = {}
    for path in directory.glob("snap_t*_*.csv"):
        stem, field = path.stem.rsplit("_", 1)
        by_t.setdefault(stem, {})[field] = path
    states = []
    for stem in sorted(by_t):
        files = by_t[stem]
        missing = [f for f in FIELD_NAMES if f not in files]
        if missing:
            raise ValueError(f"{directory}: snapshot {stem} lacks fields {missing}")
        arrays = {}
        for f in FIELD_NAMES:
            arrays[f], t = read_field_csv(files[f])
        ny, nx = arrays["u"].shape
        states.append(State(Grid(nx, ny), t=t, **arrays))
    if not states:
        raise ValueError(f"{directory}: no snapshots found")
    return sorted(states, key=lambda s: s.t)


def _print_manifest(manifest: dict) -> None:
    for check in manifest["invariants"]:
        print(f"{'PASS' if check['passed'] else 'FAIL'}  {check['name']}")
    if manifest["breach"]:
        print(f"BREACH {manifest['breach']}")
    print(f"status: {manifest['status']}")


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    out = claim_output_dir(cfg.output.dir)
    manifest, _ = execute(cfg, out)
    _print_manifest(manifest)
    print(f"artifacts in {out}")
    return 0 if manifest["status"] == "valid" else 2


def cmd_validate(args) -> int:
    cfg = resolve_config(args)
    out = claim_output_dir(args.out) if args.out else None
    manifest, _ = execute(cfg, out, write_fields=False)
    _print_manifest(manifest)
    return 0 if manifest["status"] == "valid" else 2


def _side(args, token: str) -> list[State]:
    if Path(token).is_dir():
        return read_run(token)
    ns = argparse.Namespace(**vars(args))
    ns.scenario = token
    cfg = resolve_config(ns)
    manifest, states = execute(cfg, None)
    if manifest["status"] != "valid":
        raise ValueError(f"run of {token} is invalid: {manifest['breach']}")
    return states


def cmd_compare(args) -> int:
    a, b = _side(args, args.a), _side(args, args.b)
    if len(a) != len(b):
        # runs from directories may carry an initial snapshot the other lacks
        ta = {round(s.t, 9) for s in a}
        tb = {round(s.t, 9) for s in b}
        common = ta & tb
        a = [s for s in a if round(s.t, 9) in common]
        b = [s for s in b if round(s.t, 9) in common]
    diffs: list[StateDiff] = compare_runs(a, b)
    out = claim_output_dir(args.out or "runs/compare")
    write_diff_report(diffs, out / "differences.csv")
    for d in diffs:
        diff_state = State(d.fields["u"].grid, t=d.t,
                           **{k: f.values for k, f in d.fields.items()})
        write_snapshot(diff_state, out / f"diff_t{d.t:010.4f}", raster=True)
    print(f"{'t':>8} " + " ".join(f"sup_d{f:<9}" for f in FIELD_NAMES))
    for d in diffs:
        print(f"{d.t:8.3f} " + " ".join(f"{d.sup[f]:<14.6g}" for f in FIELD_NAMES))
    print(f"report in {out}")
    return 0


def _default_profiles():
    u0 = lambda x: 0.5 + 0.3 * np.cos(np.pi * x)  # noqa: E731
    v = lambda x: 0.5 + 0.4 * np.cos(2 * np.pi * x)  # noqa: E731
    n = lambda x: 0.3 + 0.2 * np.cos(np.pi * x)  # noqa: E731
    return u0, v, n


def cmd_lattice(args) -> int:
    u0, v, n = _default_profiles()
    nodes = tuple(int(k) for k in args.nodes.split(","))
    rows = lattice.convergence_study(u0, v, n, node_counts=nodes, D=args.diffusivity,
                                     t_final=args.time)
    heat = lattice.heat_kernel_study(node_counts=nodes, D=args.diffusivity)
    out = claim_output_dir(args.out or "runs/lattice")
    meta = {"boundary": lattice.BOUNDARY, "D": args.diffusivity, "t_final": args.time,
            "u0": "0.5+0.3cos(pi x)", "v": "0.5+0.4cos(2 pi x)", "n": "0.3+0.2cos(pi x)"}
    write_error_table(rows, out / "convergence.csv", meta)
    write_error_table(heat, out / "heat_kernel.csv", {"boundary": lattice.BOUNDARY,
                                                      "D": args.diffusivity})
    for title, table in (("lattice vs limit PDE", rows), ("pure walk vs heat kernel", heat)):
        print(title)
        for r in table:
            ratio = "" if r.ratio is None else f"{r.ratio:.3f}"
            print(f"  nodes={r.nodes:5d}  L2={r.l2_error:.4e}  ratio={ratio}")
    print(f"tables in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="buruli", description="Buruli ulcer PDE simulations")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_help="output directory"):
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--seed", type=int, help="seed of the random tissue field")
        p.add_argument("--grid", type=_parse_grid, help="cells per axis, e.g. 100 or 100x80")
        p.add_argument("--dt", type=float, help="time step (0 = stability bound only)")
        p.add_argument("--snapshots", type=_parse_times, help="comma separated output times")
        p.add_argument("--horizon", type=float, help="final time")
        p.add_argument("--out", help=out_help)
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                       help="log progress")

    p = sub.add_parser("run", help="run a single scenario")
    common(p)
    p.add_argument("--scenario", help="S1..S5 or custom, optionally with :nonlinear")
    p.add_argument("--model", choices=[m.value for m in ModelKind])
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="difference of two scenarios or run directories")
    common(p)
    p.add_argument("a", help="scenario id (e.g. S1, S1:nonlinear) or run directory")
    p.add_argument("b", help="scenario id or run directory; the report holds b - a")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("lattice", help="lattice-to-PDE convergence study")
    p.add_argument("--nodes", default="16,32,64", help="comma separated node counts")
    p.add_argument("--diffusivity", type=float, default=1.0)
    p.add_argument("--time", type=float, default=0.02)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("validate", help="run and check invariants only")
    common(p, "optional directory for the manifest")
    p.add_argument("--scenario")
    p.add_argument("--model", choices=[m.value for m in ModelKind])
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OutputDirInUse, ValueError, InvariantError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
