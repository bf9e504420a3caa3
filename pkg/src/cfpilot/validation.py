"""Quick invariant and oracle checks runnable without pytest (``cfpilot validate``)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import estimation_stats, simulate_ul_decomposition
from .dcp import (DiversityMatrix, apply_move, apply_swap, build_move_matrix, delta_one_move,
                  delta_swap, fitness, make_solution)
from .exhaustive import exhaustive_dcp
from .rates import ul_sinr
from .solvers import ImsParams, cluster_bounds, ims, initial_feasible, local_search


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def random_diversity(K: int, rng: np.random.Generator, dim: int = 2) -> DiversityMatrix:
    x = rng.uniform(size=(K, dim))
    d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
    np.fill_diagonal(d, 0.0)
    return DiversityMatrix(0.5 * (d + d.T))


def check_delta_exactness(trials: int = 2000, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < trials:
        K = int(rng.integers(2, 61))
        tau = int(rng.integers(2, 13))
        dm = random_diversity(K, rng)
        sol = make_solution(rng.integers(0, tau, K), dm, tau, 0, K)
        mm = build_move_matrix(sol, dm)
        before = fitness(sol.p, dm, tau)
        if rng.random() < 0.5:
            k, j = int(rng.integers(K)), int(rng.integers(tau))
            if j == sol.p[k]:
                continue
            delta = delta_one_move(sol, mm, k, j)
            apply_move(sol, mm, dm, k, j)
        else:
            k, k2 = rng.choice(K, 2, replace=False)
            if sol.p[k] == sol.p[k2]:
                continue
            delta = delta_swap(sol, mm, dm, k, k2)
            apply_swap(sol, mm, dm, k, k2)
        worst = max(worst, abs(delta - (fitness(sol.p, dm, tau) - before)))
        done += 1
    return Check("delta exactness", worst < 1e-9, f"max |error| {worst:.2e} over {trials} moves")


def check_ims_vs_exhaustive(instances: int = 20, seed: int = 1) -> Check:
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(instances):
        K = int(rng.integers(5, 11))
        tau = int(rng.choice([2, 3]))
        dm = random_diversity(K, rng)
        lb, ub = cluster_bounds(K, tau, "vs")
        best = fitness(exhaustive_dcp(dm, tau, lb, ub).p, dm, tau)
        got = ims(dm, tau, ImsParams(mode="vs", max_sweeps=500), rng).fitness
        hits += abs(best - got) < 1e-9
    return Check("IMS reaches exhaustive optimum", hits >= 0.95 * instances, f"{hits}/{instances}")


def check_local_search_feasible(trials: int = 200, seed: int = 2) -> Check:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        K = int(rng.integers(4, 40))
        tau = int(rng.integers(2, 8))
        lb, ub = cluster_bounds(K, tau, rng.choice(["es", "vs"]))
        dm = random_diversity(K, rng)
        sol = make_solution(initial_feasible(K, tau, lb, ub, rng), dm, tau, lb, ub)
        mm = build_move_matrix(sol, dm)
        trace = []
        local_search(sol, mm, dm, trace=trace)
        bad += (not sol.is_feasible()) or bool(np.any(np.diff(trace) < -1e-12))
    return Check("local search feasible and monotone", bad == 0, f"{bad} violations in {trials} runs")


def check_mc_sinr(draws: int = 40000, seed: int = 3) -> Check:
    rng = np.random.default_rng(seed)
    beta = rng.uniform(0.2, 1.0, size=(3, 2))
    pilots = np.array([0, 0])
    eta = np.array([1.0, 0.7])
    mc = simulate_ul_decomposition(beta, pilots, 0, L=1, tau_p=1, rho_p=2.0, rho_u=3.0, eta=eta,
                                   num_draws=draws, rng=rng)
    gamma = estimation_stats(beta, pilots, 1, 2.0).gamma
    closed = ul_sinr(beta, gamma, pilots, eta, 1, 3.0)[0]
    z = abs(mc.sinr - closed) / mc.sinr_se
    return Check("Monte-Carlo SINR vs closed form", z < 3, f"closed {closed:.4f}, MC {mc.sinr:.4f}, {z:.2f} SE")


def run_all() -> list[Check]:
    checks = [check_delta_exactness(), check_local_search_feasible(), check_ims_vs_exhaustive(),
              check_mc_sinr()]
    checks.append(Check("kernel backend", True, kernels.BACKEND))
    return checks
