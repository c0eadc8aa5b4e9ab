#!/usr/bin/env python3
"""Benchmark the schedule-evaluation backends against each other.

The hot loop of offline table construction evaluates large batches of
task-to-PE assignments. Two implementations exist: an @njit kernel (numba)
and a batched vectorized fallback (numpy), selectable at runtime via the
DSSIM_BACKEND environment variable. This script times both on:

  * exhaustive enumeration over the canonical 10-task / 3-PE instance
    (59049 assignments), and
  * a neighborhood batch on the 451-task pulse-Doppler graph against the
    16-PE reference SoC (one hill-climbing round's worth of candidates).

Usage:  python benchmarks/bench_oracle.py [--repeat N]
"""
import argparse
import time
from pathlib import Path

import numpy as np

from dssim.apps import build_benchmark, build_canonical_graph
from dssim.oracle import (HAS_NUMBA, build_instance, evaluate_batch,
                          oracle_optimal_table)
from dssim.resources import load_soc_config

DATA = Path(__file__).resolve().parent.parent / "src" / "dssim" / "data"


def bench_exhaustive(backend, repeat):
    soc = load_soc_config(DATA / "canonical_soc.json")
    template, _ = build_canonical_graph()
    oracle_optimal_table(template, soc, backend=backend)  # warm (jit, caches)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        table, makespan = oracle_optimal_table(template, soc, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, makespan


def bench_neighborhood(backend, repeat):
    soc = load_soc_config(DATA / "soc16.json")
    template = build_benchmark("pulse-doppler")
    inst = build_instance(template, soc)
    base = np.array([inst.allowed[t][0] for t in range(inst.n_tasks)],
                    dtype=np.int64)
    moves = [(t, p) for t in range(0, inst.n_tasks, 9)
             for p in inst.allowed[t] if p != base[t]]
    batch = np.tile(base, (len(moves), 1))
    for i, (t, p) in enumerate(moves):
        batch[i, t] = p
    evaluate_batch(inst, batch[:4], backend=backend)  # warm
    best = float("inf")
    checksum = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        makespans = evaluate_batch(inst, batch, backend=backend)
        best = min(best, time.perf_counter() - t0)
        checksum = int(makespans.min())
    return best, len(moves), checksum


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    print(f"{'benchmark':<28} {'backend':<8} {'best time':>10}  result")
    results = {}
    for backend in backends:
        dt, makespan = bench_exhaustive(backend, args.repeat)
        results[("exhaustive", backend)] = dt
        print(f"{'exhaustive-canonical-59049':<28} {backend:<8} "
              f"{dt * 1000:>8.1f}ms  makespan={makespan}ns")
    for backend in backends:
        dt, n, checksum = bench_neighborhood(backend, args.repeat)
        results[("neighborhood", backend)] = dt
        print(f"{'neighborhood-pd-451-task':<28} {backend:<8} "
              f"{dt * 1000:>8.1f}ms  batch={n} best={checksum}ns")
    if HAS_NUMBA:
        for name in ("exhaustive", "neighborhood"):
            speedup = results[(name, "numpy")] / results[(name, "numba")]
            print(f"{name}: numba is {speedup:.1f}x vs numpy")


if __name__ == "__main__":
    main()
