"""Command-line entry point: ``bglsim run | sweep | validate``.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
The output directory is ``--output-dir``, else ``$BGLSIM_OUTPUT_DIR``,
else ``results``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import subprocess
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

from bglsim.config import apply_overrides, load_config, resolve
from bglsim.errors import BglSimError, ConfigError
from bglsim.harness import SWEEP_PARAMETERS, SweepSpec, format_float, run_episode, run_sweep, sweep_csv
from bglsim.policies import make_policy
from bglsim.validation import run_all

OUTPUT_ENV = "BGLSIM_OUTPUT_DIR"
RUN_COLUMNS = ("policy", "V", "n_end", "seed", "avg_cost", "avg_queue", "max_queue", "avg_grid_power")


class UsageError(Exception):
    pass


def version_string() -> str:
    try:
        base = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        base = "0+unknown"
    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).parent, capture_output=True, text=True, timeout=5,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        described = ""
    return f"{base}+{described}" if described else base


def output_dir(args) -> Path:
    path = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or "results")
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_outputs(out: Path, stem: str, csv_text: str, command: str, cfg: dict,
                  config_path, started: str) -> Path:
    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write(csv_text)
    manifest = {
        "command": command,
        "config_path": None if config_path is None else str(config_path),
        "output": csv_path.name,
        "output_dir": str(out),
        "version": version_string(),
        "started_at": started,
        "config": cfg,
    }
    with open(out / f"{stem}.manifest.json", "w", newline="") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def cmd_run(args) -> int:
    started = _now()
    cfg = apply_overrides(load_config(args.config), args.set)
    rc = resolve(cfg)
    policy = make_policy(rc.policy, rc.V)
    metrics = run_episode(rc.scenario, rc.params, policy)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RUN_COLUMNS)
    writer.writerow([
        rc.policy, "" if rc.V is None or rc.policy != "bgl" else format_float(rc.V),
        rc.scenario.n_end, rc.scenario.seed,
        format_float(metrics.avg_cost), format_float(metrics.avg_queue),
        format_float(metrics.max_queue), format_float(metrics.avg_grid_power),
    ])
    path = write_outputs(output_dir(args), args.name, buf.getvalue(), "run", cfg,
                         args.config, started)
    print(f"policy={rc.policy} n_end={rc.scenario.n_end} seed={rc.scenario.seed}")
    print(f"avg_cost={metrics.avg_cost!r}")
    print(f"avg_queue={metrics.avg_queue!r}")
    print(f"wrote {path}")
    return 0


def _parse_values(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--values must be comma-separated numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    started = _now()
    cfg = apply_overrides(load_config(args.config), args.set)
    if args.parameter is not None:
        cfg["sweep"]["parameter"] = args.parameter
    if args.values is not None:
        cfg["sweep"]["values"] = _parse_values(args.values)
    if args.replications is not None:
        cfg["sweep"]["replications"] = args.replications
    sweep = cfg["sweep"]
    if sweep["parameter"] not in SWEEP_PARAMETERS:
        raise UsageError(
            f"unknown sweep parameter {sweep['parameter']!r}; expected one of {SWEEP_PARAMETERS}"
        )
    if not sweep["values"]:
        raise UsageError("sweep needs at least one value (--values)")
    rc = resolve(cfg)
    V = rc.V
    if sweep["parameter"] == "V":
        if rc.policy == "bgl" and any(not v > 0 for v in sweep["values"]):
            raise UsageError("swept V values must be > 0")
    spec = SweepSpec(
        swept_parameter=sweep["parameter"],
        values=tuple(sweep["values"]),
        scenario=rc.scenario,
        params=rc.params,
        policy=rc.policy,
        V=V,
        replications=int(sweep["replications"]),
    )
    rows = run_sweep(spec, jobs=args.jobs)
    path = write_outputs(output_dir(args), args.name, sweep_csv(rows), "sweep", cfg,
                         args.config, started)
    print(f"{'value':>12} {'avg_cost':>14} {'avg_queue':>12}")
    for row in rows:
        print(f"{row.swept_value:>12.6g} {row.metrics.avg_cost:>14.6g} {row.metrics.avg_queue:>12.6g}")
    print(f"wrote {path}")
    return 0


def cmd_validate(args) -> int:
    results = run_all(
        n_states=args.states,
        grid_step=args.grid_step,
        split_cases=args.split_cases,
        counterexample_budget=args.counterexample_budget,
        seed=args.seed,
    )
    for r in results:
        print(f"[{r.status.upper():7}] {r.name}: {r.detail}")
    return 0 if all(r.ok for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bglsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="TOML config or JSON run manifest")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field (repeatable)")
        p.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_ENV} or ./results)")

    p_run = sub.add_parser("run", help="simulate one episode")
    common(p_run)
    p_run.add_argument("--name", default="run", help="output file stem")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep V, mean_gain or battery_B")
    common(p_sweep)
    p_sweep.add_argument("--parameter", help=f"one of {', '.join(SWEEP_PARAMETERS)}")
    p_sweep.add_argument("--values", help="comma-separated values")
    p_sweep.add_argument("--replications", type=int)
    p_sweep.add_argument("--jobs", type=int, default=None,
                         help="parallel episodes (default: CPU count)")
    p_sweep.add_argument("--name", default="sweep", help="output file stem")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="run the oracle suites")
    p_val.add_argument("--states", type=int, default=10**4)
    p_val.add_argument("--grid-step", type=float, default=None,
                       help="absolute grid step (default: Q/1e4 per state)")
    p_val.add_argument("--split-cases", type=int, default=10**4)
    p_val.add_argument("--counterexample-budget", type=int, default=500)
    p_val.add_argument("--seed", type=int, default=0)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"bglsim: config error: {exc}", file=sys.stderr)
        return 2
    except BglSimError as exc:
        print(f"bglsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
