"""Compare the compiled and pure-Python local-search kernels.

    python3 benchmarks/bench_kernels.py [--K 40] [--tau 10] [--reps 5]

Each run starts both backends from the same solution and seed, checks that
they end on the same assignment, and reports the median wall time.
"""
import argparse
import statistics
import time

import numpy as np

from cfpilot import kernels
from cfpilot.dcp import make_solution
from cfpilot.solvers import REL_EPS, cluster_bounds, initial_feasible
from cfpilot.validation import random_diversity


def run(backend, p0, dm, tau, lb, ub, seed, rounds):
    sol = make_solution(p0.copy(), dm, tau, lb, ub)
    m = backend.build_move_matrix(sol.p, dm.d, tau)
    state = np.array([seed], dtype=np.uint64)
    eps = REL_EPS * float(dm.d.max())
    K = dm.K
    t0 = time.perf_counter()
    backend.local_search(sol.p, sol.c, sol.s, m, dm.d, lb, ub, True, True, eps, 0)
    for _ in range(rounds):
        backend.weak_perturbation(sol.p, sol.c, sol.s, m, dm.d, lb, ub, True, 3, K, state)
        backend.local_search(sol.p, sol.c, sol.s, m, dm.d, lb, ub, True, True, eps, 0)
    return time.perf_counter() - t0, sol.p


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=40)
    ap.add_argument("--tau", type=int, default=10)
    ap.add_argument("--rounds", type=int, default=20)
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    dm = random_diversity(args.K, rng)
    lb, ub = cluster_bounds(args.K, args.tau, "es")
    p0 = initial_feasible(args.K, args.tau, lb, ub, rng)
    backends = {"python": kernels.load("python")}
    try:
        backends["cython"] = kernels.load("cython")
    except ImportError:
        print("compiled extension not built; timing the Python backend only")

    times, finals = {}, {}
    for name, mod in backends.items():
        runs = [run(mod, p0, dm, args.tau, lb, ub, 12345, args.rounds) for _ in range(args.reps)]
        times[name] = statistics.median(t for t, _ in runs)
        finals[name] = runs[0][1]
        print(f"{name:>7}: {times[name] * 1e3:9.2f} ms  (K={args.K}, tau={args.tau}, {args.rounds} rounds)")
    if len(backends) == 2:
        same = np.array_equal(finals["python"], finals["cython"])
        print(f"speedup: {times['python'] / times['cython']:.1f}x, identical result: {same}")


if __name__ == "__main__":
    main()
