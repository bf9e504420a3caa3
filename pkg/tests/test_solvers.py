import numpy as np
import pytest

from cfpilot import kernels
from cfpilot.channel import estimation_stats
from cfpilot.dcp import DiversityMatrix, build_move_matrix, fitness, make_solution
from cfpilot.exhaustive import exhaustive_dcp
from cfpilot.rates import normalized_snrs, ul_rate
from cfpilot.scenario import RadioParams
from cfpilot.solvers import (ClusterMode, ImsParams, InfeasibleBoundsError, cluster_bounds, greedy_assignment,
                             ims, initial_feasible, local_search, random_assignment, repulsive_assignment,
                             robust_perturbation, unique_pilots, weak_perturbation)

from conftest import rand_dm

RHO_P, RHO_U, _ = normalized_snrs(RadioParams())


def _state(seed):
    return np.array([seed], dtype=np.uint64)


def test_cluster_bounds():
    assert cluster_bounds(12, 3, "es") == (4, 4)
    assert cluster_bounds(40, 10, "es") == (4, 4)
    assert cluster_bounds(41, 10, "es") == (4, 5)
    assert cluster_bounds(40, 10, "vs") == (1, 40)
    assert cluster_bounds(3, 5, "vs") == (0, 3)
    assert cluster_bounds(3, 5, "es") == (0, 1)


def test_initial_feasible_examples(rng):
    p = initial_feasible(12, 3, 4, 4, rng)
    assert sorted(np.bincount(p)) == [4, 4, 4]
    assert sorted(initial_feasible(5, 5, 1, 1, rng)) == [0, 1, 2, 3, 4]
    with pytest.raises(InfeasibleBoundsError):
        initial_feasible(5, 2, 3, 3, rng)


def test_initial_feasible_random(rng):
    for _ in range(1000):
        K = int(rng.integers(1, 50))
        tau = int(rng.integers(1, 12))
        lb, ub = cluster_bounds(K, tau, rng.choice(["es", "vs"]))
        s = np.bincount(initial_feasible(K, tau, lb, ub, rng), minlength=tau)
        assert s.sum() == K and np.all((s >= lb) & (s <= ub))


def _all_moves_min_delta(sol, mm, dm):
    """Smallest delta over every feasible OneMove and SwapMove."""
    out = np.inf
    for k in range(sol.K):
        for q in range(sol.tau_p):
            i = sol.p[k]
            if q != i and sol.s[i] > sol.lb and sol.s[q] < sol.ub:
                out = min(out, kernels.delta_one(sol.p, sol.c, sol.s, mm, k, q))
        for k2 in range(k + 1, sol.K):
            if sol.p[k] != sol.p[k2]:
                out = min(out, kernels.delta_swap(sol.p, sol.c, sol.s, mm, dm.d, k, k2, True))
    return out


def test_local_search_fixed_point(rng):
    dm = rand_dm(20, rng)
    sol = make_solution(initial_feasible(20, 4, 5, 5, rng), dm, 4, 5, 5)
    mm = build_move_matrix(sol, dm)
    local_search(sol, mm, dm)
    p = sol.p.copy()
    trace = []
    assert local_search(sol, mm, dm, trace=trace) == 1
    assert np.array_equal(p, sol.p) and trace[0] == trace[-1]


def test_local_search_monotone(rng):
    for _ in range(50):
        K = int(rng.integers(5, 40))
        tau = int(rng.integers(2, 8))
        lb, ub = cluster_bounds(K, tau, rng.choice(["es", "vs"]))
        dm = rand_dm(K, rng)
        sol = make_solution(initial_feasible(K, tau, lb, ub, rng), dm, tau, lb, ub)
        trace = []
        local_search(sol, build_move_matrix(sol, dm), dm, trace=trace)
        assert np.all(np.diff(trace) >= -1e-12) and sol.is_feasible()


def test_local_search_alone_vs_exhaustive(rng):
    hits = 0
    for _ in range(100):
        dm = rand_dm(8, rng)
        best = fitness(exhaustive_dcp(dm, 2, 4, 4).p, dm, 2)
        sol = make_solution(initial_feasible(8, 2, 4, 4, rng), dm, 2, 4, 4)
        local_search(sol, build_move_matrix(sol, dm), dm)
        hits += abs(fitness(sol.p, dm, 2) - best) < 1e-9
    assert hits >= 80


def test_weak_perturbation_identity_and_feasible(rng):
    for _ in range(1000):
        K = int(rng.integers(3, 30))
        tau = int(rng.integers(2, 6))
        lb, ub = cluster_bounds(K, tau, rng.choice(["es", "vs"]))
        dm = rand_dm(K, rng)
        sol = make_solution(initial_feasible(K, tau, lb, ub, rng), dm, tau, lb, ub)
        mm = build_move_matrix(sol, dm)
        p = sol.p.copy()
        weak_perturbation(sol, mm, dm, 0, K, _state(1))
        assert np.array_equal(p, sol.p)
        weak_perturbation(sol, mm, dm, 3, K, _state(int(rng.integers(2**62))))
        assert sol.is_feasible()


def test_weak_perturbation_bounded_drop(rng):
    for _ in range(50):
        dm = rand_dm(16, rng)
        sol = make_solution(initial_feasible(16, 4, 1, 16, rng), dm, 4, 1, 16)
        mm = build_move_matrix(sol, dm)
        local_search(sol, mm, dm)
        before = fitness(sol.p, dm, 4)
        worst = _all_moves_min_delta(sol, mm, dm)
        weak_perturbation(sol, mm, dm, 1, 16, _state(int(rng.integers(2**62))))
        assert before - fitness(sol.p, dm, 4) <= -worst + 1e-9


def test_robust_perturbation_strength():
    assert ImsParams(theta=1.5).robust_strength(40, 10) == 6
    assert ImsParams(theta=1.0).robust_strength(40, 10) == 4


def test_robust_perturbation_applies_exact_count(rng):
    py = kernels.load("python")
    dm = rand_dm(40, rng)
    sol = make_solution(initial_feasible(40, 10, 4, 4, rng), dm, 10, 4, 4)
    mm = build_move_matrix(sol, dm)
    ref = sol.copy()
    ref_mm = mm.copy()
    st_ref = _state(77)
    for _ in range(6):
        kind, a, b = py.random_move(ref.p, ref.s, 4, 4, st_ref)
        assert kind == py.SWAP_MOVE
        py.apply_swap(ref.p, ref.c, ref.s, ref_mm, dm.d, a, b)
    st = _state(77)
    robust_perturbation(sol, mm, dm, 6, st)
    assert np.array_equal(sol.p, ref.p) and st[0] == st_ref[0]
    p = sol.p.copy()
    robust_perturbation(sol, mm, dm, 0, st)
    assert np.array_equal(p, sol.p)


def test_robust_perturbation_feasible(rng):
    for _ in range(1000):
        K = int(rng.integers(3, 30))
        tau = int(rng.integers(2, 6))
        lb, ub = cluster_bounds(K, tau, rng.choice(["es", "vs"]))
        dm = rand_dm(K, rng)
        sol = make_solution(initial_feasible(K, tau, lb, ub, rng), dm, tau, lb, ub)
        robust_perturbation(sol, build_move_matrix(sol, dm), dm, 5, _state(int(rng.integers(2**62))))
        assert sol.is_feasible()


def test_random_move_uniform():
    # K=3, tau=2, lb=0, ub=3: 3 one-moves and 2 swaps (pairs on different pilots) feasible
    py = kernels.load("python")
    p = np.array([0, 0, 1], dtype=np.int64)
    s = np.array([2, 1], dtype=np.int64)
    st = _state(5)
    counts = {}
    for _ in range(5000):
        mv = py.random_move(p, s, 0, 3, st)
        counts[mv] = counts.get(mv, 0) + 1
    assert len(counts) == 5
    assert max(counts.values()) / min(counts.values()) < 1.2


def test_ims_no_pairs():
    dm = rand_dm(5, np.random.default_rng(0))
    res = ims(dm, 5, ImsParams(mode="es", max_sweeps=50), np.random.default_rng(0))
    assert res.fitness == 0.0 and sorted(res.pilots) == list(range(5))


def test_ims_matches_exhaustive(rng):
    hits = 0
    for _ in range(100):
        K = int(rng.integers(4, 11))
        tau = int(rng.choice([2, 3]))
        dm = rand_dm(K, rng)
        lb, ub = cluster_bounds(K, tau, "vs")
        best = exhaustive_dcp(dm, tau, lb, ub)
        res = ims(dm, tau, ImsParams(mode="vs", max_sweeps=2000), rng)
        assert best.fitness() >= res.fitness - 1e-9
        hits += abs(best.fitness() - res.fitness) < 1e-9
    assert hits >= 95


def test_ims_reported_fitness_exact(rng):
    dm = rand_dm(30, rng)
    res = ims(dm, 6, ImsParams(max_sweeps=300), rng)
    assert res.fitness == pytest.approx(fitness(res.pilots, dm, 6), abs=1e-9)
    assert res.assignment.is_feasible()


def test_ims_time_budget(rng):
    dm = rand_dm(30, rng)
    res = ims(dm, 6, ImsParams(t_max=0.05), rng)
    assert res.elapsed < 1.0 and res.assignment.is_feasible()


def test_ims_deterministic():
    dm = rand_dm(25, np.random.default_rng(1))
    a = ims(dm, 5, ImsParams(max_sweeps=200), np.random.default_rng(9))
    b = ims(dm, 5, ImsParams(max_sweeps=200), np.random.default_rng(9))
    assert np.array_equal(a.pilots, b.pilots) and a.fitness == b.fitness


def test_ims_observer_sees_feasible(rng):
    dm = rand_dm(23, rng)
    seen = []
    ims(dm, 5, ImsParams(mode="es", max_sweeps=200), rng,
        observer=lambda sol: seen.append(sol.s.copy()))
    assert seen and all(np.all((s >= 4) & (s <= 5)) for s in seen)


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
def test_backend_parity(rng):
    py, cy = kernels.load("python"), kernels.load("cython")
    for _ in range(20):
        K = int(rng.integers(5, 30))
        tau = int(rng.integers(2, 6))
        lb, ub = cluster_bounds(K, tau, rng.choice(["es", "vs"]))
        dm = rand_dm(K, rng)
        base = make_solution(initial_feasible(K, tau, lb, ub, rng), dm, tau, lb, ub)
        seed = int(rng.integers(2**62))
        out = []
        for mod in (py, cy):
            sol = base.copy()
            m = mod.build_move_matrix(sol.p, dm.d, tau)
            st = _state(seed)
            mod.local_search(sol.p, sol.c, sol.s, m, dm.d, lb, ub, True, True, 1e-12, 0)
            mod.weak_perturbation(sol.p, sol.c, sol.s, m, dm.d, lb, ub, True, 3, K, st)
            mod.robust_perturbation(sol.p, sol.c, sol.s, m, dm.d, lb, ub, 4, st)
            mod.local_search(sol.p, sol.c, sol.s, m, dm.d, lb, ub, True, True, 1e-12, 0)
            out.append((sol.p, sol.c, m, st[0]))
        assert np.array_equal(out[0][0], out[1][0]) and out[0][3] == out[1][3]
        assert np.array_equal(out[0][1], out[1][1]) and np.array_equal(out[0][2], out[1][2])


def test_random_assignment_chi_square():
    rng = np.random.default_rng(3)
    counts = np.bincount(np.concatenate([random_assignment(1, 5, rng).p for _ in range(10000)]), minlength=5)
    chi2 = ((counts - 2000.0) ** 2 / 2000.0).sum()
    assert chi2 < 18.47  # chi-square 0.999 quantile, 4 degrees of freedom


def test_random_assignment_sizes(rng):
    sol = random_assignment(17, 4, rng)
    assert sol.s.sum() == 17 and np.isnan(sol.c).all()
    assert random_assignment(1, 3, rng).p[0] in range(3)


def _beta(rng, M=20, K=6):
    return 10 ** rng.uniform(-12, -8, (M, K))


def test_greedy_zero_iters_is_random(rng):
    beta = _beta(rng)
    a = greedy_assignment(beta, 3, rho_p=RHO_P, rho_u=RHO_U, L=1, n_iters=0, rng=np.random.default_rng(4)).p
    b = random_assignment(6, 3, np.random.default_rng(4)).p
    assert np.array_equal(a, b)


def test_greedy_step_picks_min_metric(rng):
    beta = _beta(rng, K=10)
    p0 = greedy_assignment(beta, 4, rho_p=RHO_P, rho_u=RHO_U, L=1, n_iters=0, rng=np.random.default_rng(8)).p
    p1 = greedy_assignment(beta, 4, rho_p=RHO_P, rho_u=RHO_U, L=1, n_iters=1, rng=np.random.default_rng(8)).p
    gamma = estimation_stats(beta, p0, 4, RHO_P).gamma
    worst = int(np.argmin(ul_rate(beta, gamma, p0, np.ones(10), 1, RHO_U)))
    others = np.arange(10) != worst
    metric = [beta[:, others & (p0 == q)].sum() for q in range(4)]
    expect = p0.copy()
    expect[worst] = int(np.argmin(metric))
    assert np.array_equal(p1, expect)


def test_greedy_few_ues_moves_to_free_pilot(rng):
    # with K <= tau_p an unused pilot always exists, so each updated UE lands alone
    for seed in range(30):
        beta = _beta(np.random.default_rng(seed), K=5)
        p = greedy_assignment(beta, 6, rho_p=RHO_P, rho_u=RHO_U, L=1, n_iters=1,
                              rng=np.random.default_rng(seed)).p
        p0 = random_assignment(5, 6, np.random.default_rng(seed)).p
        moved = np.flatnonzero(p != p0)
        for k in moved:
            assert np.sum(p == p[k]) == 1


def test_repulsive_properties(rng):
    dm = rand_dm(23, rng)
    sol = repulsive_assignment(dm, 5, rng)
    assert set(sol.s) <= {4, 5}
    mm = build_move_matrix(sol, dm)
    for k in range(23):
        for k2 in range(k + 1, 23):
            if sol.p[k] != sol.p[k2]:
                assert kernels.delta_swap(sol.p, sol.c, sol.s, mm, dm.d, k, k2, False) <= 1e-9


def test_repulsive_dominated_by_ims(rng):
    wins = 0
    for _ in range(100):
        dm = rand_dm(40, rng)
        rep = repulsive_assignment(dm, 10, rng).fitness()
        wins += rep <= ims(dm, 10, ImsParams(mode=ClusterMode.ES, max_sweeps=500), rng).fitness + 1e-9
    assert wins >= 90


def test_unique_pilots():
    assert np.array_equal(unique_pilots(4), [0, 1, 2, 3])


def test_pure_python_fallback_selected():
    import os
    import subprocess
    import sys

    code = ("import numpy as np; from cfpilot import kernels; from cfpilot.solvers import ims, ImsParams;"
            "from cfpilot.dcp import DiversityMatrix;"
            "x = np.random.default_rng(0).uniform(size=(12, 2));"
            "d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1)); np.fill_diagonal(d, 0);"
            "r = ims(DiversityMatrix(0.5 * (d + d.T)), 3, ImsParams(max_sweeps=40), np.random.default_rng(1));"
            "print(kernels.BACKEND, list(r.pilots))")
    env = dict(os.environ, CFPILOT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout
    assert out.startswith("python ")
    if kernels.BACKEND == "cython":
        dm = rand_dm(12, np.random.default_rng(0))
        res = ims(dm, 3, ImsParams(max_sweeps=40), np.random.default_rng(1))
        assert out.split(" ", 1)[1].strip() == str(list(res.pilots))
