"""Command line front end: run scenario files, execute presets, fit curves."""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .engine import Simulator
from .harness import (CSV_VERSION_LINE, compute_metrics, connectivity_csv_bytes,
                      fit_time_constant, read_run_csv, run_csv_bytes,
                      time_to_threshold, write_pgm)
from .presets import get_preset
from .scenario import ScenarioError, load_scenario


def _cmd_run(args) -> int:
    try:
        script = load_scenario(args.scenario)
    except ScenarioError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if args.seed is not None:
        script = script.with_seed(args.seed)
    sim = Simulator(script)
    trace = sim.run()
    series = compute_metrics(trace)
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.scenario))[0]
    run_name = f"{stem}_seed{script.params.seed}"
    csv_path = os.path.join(args.out, f"{run_name}.csv")
    capacity = max(int(series.global_ce[-1]), 1) if len(series.global_ce) else 1
    with open(csv_path, "wb") as fh:
        fh.write(run_csv_bytes(series, trace, capacity))
    for aid, agent in sorted(sim.agents.items()):
        write_pgm(os.path.join(args.out, f"{run_name}_map_{aid}.pgm"), agent.grid)
    if args.trace_connectivity:
        with open(os.path.join(args.out, f"{run_name}_connectivity.csv"), "wb") as fh:
            fh.write(connectivity_csv_bytes(trace))
    final = int(series.global_ce[-1]) if len(series.global_ce) else 0
    print(f"{run_name}: {len(trace.records)} ticks, explored {final} cells -> {csv_path}")
    return 0


def _cmd_preset(args) -> int:
    try:
        preset = get_preset(args.name, repeats=args.repeats)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    from .harness import run_preset

    status = run_preset(preset, args.out, trace_connectivity=args.trace_connectivity)
    if status == 0:
        n_runs = len(preset.scripts) * min(preset.repeats, len(preset.seeds))
        print(f"preset {preset.name}: {n_runs} runs written to {args.out}")
    return status


def _cmd_fit(args) -> int:
    try:
        series, capacity = read_run_csv(args.csv)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    ce_inf = args.ce_inf if args.ce_inf is not None else capacity
    try:
        tau = fit_time_constant(series, ce_inf)
        print(f"tau = {tau:.3f} s (ce_inf = {ce_inf})")
    except ValueError as err:
        print(f"fit failed: {err}", file=sys.stderr)
        return 1
    t60 = time_to_threshold(series, 0.6 * ce_inf)
    if t60 is not None:
        print(f"time to 60% of ce_inf: {t60:.3f} s")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="swarm-gridmapper",
        description="Deterministic multi-robot exploration simulator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario", help="path to a scenario YAML file")
    p_run.add_argument("--seed", type=int, default=None, help="override the script seed")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--trace-connectivity", action="store_true",
                       help="also write the per-tick connectivity CSV")
    p_run.set_defaults(func=_cmd_run)

    p_preset = sub.add_parser("preset", help="run a named experiment preset")
    p_preset.add_argument("name", help="scalability | robustness | flexibility | multifloor")
    p_preset.add_argument("--repeats", type=int, default=None, help="seeded repeats per script")
    p_preset.add_argument("--out", default="out", help="output directory")
    p_preset.add_argument("--trace-connectivity", action="store_true")
    p_preset.set_defaults(func=_cmd_preset)

    p_fit = sub.add_parser("fit", help="fit the exploration time constant to a run CSV")
    p_fit.add_argument("csv", help=f"per-run CSV ({CSV_VERSION_LINE!r} schema)")
    p_fit.add_argument("--ce-inf", type=float, default=None,
                       help="asymptotic cell count (default: capacity header)")
    p_fit.set_defaults(func=_cmd_fit)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
