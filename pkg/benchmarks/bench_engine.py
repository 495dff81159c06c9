"""Benchmark the compiled event-loop kernel against the pure-Python one.

Runs identical replicate sets through both kernels, times them, verifies
the outputs agree bit for bit, and prints events/second plus the speedup.

Usage:
    python benchmarks/bench_engine.py [--runs 20] [--seed 0]
"""

import argparse
import sys
import time

import numpy as np

from deffuant_lab import (Ball, Norm, OpinionSpace, SimParams, TriangularBall,
                          UniformBall, UniformBox, interval, load_kernel, run)
from deffuant_lab.graphs import complete, path, torus2d


def workloads():
    unit = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    ball2 = OpinionSpace(Ball(np.zeros(2), 1.0), Norm.l2(2))
    ball3 = OpinionSpace(Ball(np.zeros(3), 1.0), Norm.linf(3))
    return [
        ("interval/complete(12)/mu=0.02", complete(12), unit,
         UniformBox(unit), SimParams(tau=1.0, mu=0.02)),
        ("interval/path(30)/mu=0.3", path(30), unit,
         UniformBox(unit), SimParams(tau=0.6, mu=0.3)),
        ("ball-d2/torus(5x5)/triangular", torus2d(5, 5), ball2,
         TriangularBall(ball2), SimParams(tau=2.3, mu=0.25)),
        ("ball-d3-linf/complete(10)", complete(10), ball3,
         UniformBall(ball3), SimParams(tau=2.1, mu=0.1)),
    ]


def time_kernel(kernel, graph, space, dist, params, n_runs, seed):
    """Total wall time, total events, and final-state digests per replicate."""
    t0 = time.perf_counter()
    events = 0
    digests = []
    for r in range(n_runs):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
        out = run(graph, space, dist, params, rng, kernel=kernel)
        events += out.total_events
        digests.append((out.final_configuration.opinions.tobytes(),
                        out.final_time, out.total_events,
                        out.classification.value))
    return time.perf_counter() - t0, events, digests


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=20,
                        help="replicates per workload (default 20)")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    args = parser.parse_args(argv)

    try:
        kern_c = load_kernel("c")
    except ImportError:
        print("compiled kernel not available; nothing to compare against",
              file=sys.stderr)
        return 1
    kern_py = load_kernel("python")

    header = f"{'workload':<34} {'events':>9} {'c ev/s':>12} {'py ev/s':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, graph, space, dist, params in workloads():
        t_c, ev_c, dig_c = time_kernel(kern_c, graph, space, dist, params,
                                       args.runs, args.seed)
        t_py, ev_py, dig_py = time_kernel(kern_py, graph, space, dist, params,
                                          args.runs, args.seed)
        if ev_c != ev_py or dig_c != dig_py:
            print(f"{name}: KERNEL MISMATCH", file=sys.stderr)
            return 2
        rate_c = ev_c / t_c
        rate_py = ev_py / t_py
        print(f"{name:<34} {ev_c:>9} {rate_c:>12.0f} {rate_py:>12.0f} "
              f"{rate_c / rate_py:>7.1f}x")
    print(f"\nall workloads bit-identical across kernels ({args.runs} runs each)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
