"""Command-line interface: run, check, preset.

Exit codes: 0 success, 1 check or validation failure, 2 usage error,
3 simulation divergence.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

import numpy as np

from . import _kern
from .checks import run_invariant_suite
from .errors import ValidationError
from .presets import shoulder_scenario
from .scenario_io import load_scenario, save_scenario, write_trace
from .simulate import simulate

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="myolink",
        description="Muscle-driven linkage simulation with backstepping control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and export the trace")
    run.add_argument("--scenario", required=True, help="scenario JSON file")
    run.add_argument("--seed", type=int, default=None, help="override the file's seed")
    run.add_argument("--out", default=None, help="CSV trace output path")
    run.add_argument("--summary", action="store_true", help="print extended run statistics")

    check = sub.add_parser("check", help="run the randomized invariant suite")
    check.add_argument("--scenario", required=True, help="scenario JSON file")
    check.add_argument("--samples", type=int, default=100, help="random states per invariant")
    check.add_argument("--seed", type=int, default=0, help="sampling seed")

    preset = sub.add_parser("preset", help="write a bundled scenario file")
    preset.add_argument("name", choices=["shoulder"], help="preset name")
    preset.add_argument("--out", required=True, help="output path")
    return parser


def _load(path):
    try:
        return load_scenario(path)
    except FileNotFoundError:
        print(f"error: scenario file not found: {path}", file=sys.stderr)
        return EXIT_USAGE
    except IsADirectoryError:
        print(f"error: scenario path is a directory: {path}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def _cmd_run(args) -> int:
    scenario = _load(args.scenario)
    if isinstance(scenario, int):
        return scenario
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    t0 = time.perf_counter()
    trace = simulate(scenario)
    wall = time.perf_counter() - t0
    if args.out:
        write_trace(trace, args.out)
    if trace.fault:
        print(f"diverged: {trace.fault} after {len(trace)} records", file=sys.stderr)
        return EXIT_DIVERGED
    settle = trace.settling_time()
    settle_txt = f"{settle:.3f} s" if settle is not None else "not settled"
    print(
        f"{scenario.name}: seed={scenario.seed} settling={settle_txt} "
        f"final_max_error={np.degrees(np.abs(trace.q_err[-1]).max()):.4f} deg "
        f"wall={wall:.2f} s backend={_kern.active_backend()}"
    )
    if args.summary:
        print(f"  steps={len(trace)} dt={scenario.dt} t_end={scenario.t_end}")
        print(f"  V0={trace.V[0]:.6e} V_end={trace.V[-1]:.6e}")
        increases = np.diff(trace.V)
        print(f"  cumulative_V_increase={increases[increases > 0].sum():.3e}")
        print(f"  final_forces_N={np.array2string(trace.F[-1], precision=2)}")
        print(f"  final_torque_Nm={np.array2string(trace.tau[-1], precision=4)}")
    return EXIT_OK


def _cmd_check(args) -> int:
    scenario = _load(args.scenario)
    if isinstance(scenario, int):
        return scenario
    failures = run_invariant_suite(scenario, samples=args.samples, seed=args.seed)
    if failures:
        for failure in failures:
            print(f"FAIL {failure}")
        print(f"{len(failures)} invariant failure(s) over {args.samples} samples")
        return EXIT_FAILURE
    print(f"all invariants hold over {args.samples} samples (backend={_kern.active_backend()})")
    return EXIT_OK


def _cmd_preset(args) -> int:
    save_scenario(shoulder_scenario(), args.out)
    print(f"wrote {args.name} scenario to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors and 0 on --help
        return int(exc.code) if exc.code else EXIT_OK
    handlers = {"run": _cmd_run, "check": _cmd_check, "preset": _cmd_preset}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
