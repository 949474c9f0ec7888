#!/usr/bin/env python3
"""Timing comparison between the compiled and pure-numpy kernel backends.

Per-kernel microbenchmarks plus an end-to-end closed-loop run. Usage:

    python benchmarks/bench_backends.py [--t-end 1.0] [--repeat 300]
"""

import argparse
import dataclasses
import time

import numpy as np

from myolink import _kern, set_backend
from myolink.presets import shoulder_scenario
from myolink.simulate import simulate


def time_call(fn, args, repeat):
    fn(*args)  # warm up
    start = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - start) / repeat


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--t-end", type=float, default=1.0, help="closed-loop run length (s)")
    parser.add_argument("--repeat", type=int, default=300, help="microbenchmark repetitions")
    args = parser.parse_args()

    scn = dataclasses.replace(shoulder_scenario(), t_end=args.t_end)
    margs = scn.model.packed()
    muargs = (*scn.muscles._geom, *scn.muscles._tendon)
    q = scn.q_target
    qdot = np.full(3, 0.5)
    S = scn.muscles.slack_lengths * 1.01

    kernels = [
        ("fk_frames", lambda k: (k.fk_frames, (margs[0], margs[1], q))),
        ("dynamics_terms", lambda k: (k.dynamics_terms, (*margs, q, qdot))),
        ("muscle_eval", lambda k: (k.muscle_eval, (*margs[:3], *muargs, q, S))),
        ("torque_jacobians", lambda k: (k.torque_jacobians, (*margs[:3], *muargs, q, S))),
    ]

    names = _kern.available_backends()
    if "compiled" not in names:
        print("note: compiled backend unavailable, timing the reference only")

    micro = {}
    for backend in names:
        mod = _kern._BACKENDS[backend]
        for label, make in kernels:
            fn, call_args = make(mod)
            micro[(backend, label)] = time_call(fn, call_args, args.repeat)

    print(f"{'kernel':<18}" + "".join(f"{b:>14}" for b in names) + ("  speedup" if len(names) == 2 else ""))
    for label, _ in kernels:
        row = f"{label:<18}"
        times = [micro[(b, label)] for b in names]
        row += "".join(f"{t * 1e6:>11.1f} us" for t in times)
        if len(names) == 2:
            row += f"  {times[0] / times[1] if names[0] != 'compiled' else times[1] / times[0]:>6.1f}x"
        print(row)

    print(f"\nclosed-loop run, t_end={args.t_end}s, dt={scn.dt}s:")
    walls = {}
    for backend in names:
        set_backend(backend)
        start = time.perf_counter()
        trace = simulate(scn)
        walls[backend] = time.perf_counter() - start
        assert trace.fault is None
        print(f"  {backend:<10} {walls[backend]:>8.2f} s wall")
    if len(walls) == 2:
        print(f"  end-to-end speedup: {walls['reference'] / walls['compiled']:.1f}x")


if __name__ == "__main__":
    main()
