"""Pilot assignment algorithms: iterative maxima search and the baselines."""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import estimation_stats
from .dcp import DiversityMatrix, PilotSolution, build_move_matrix, fitness, make_solution, resync
from .rates import ul_rate

# accepted improvements must beat this fraction of the largest diversity,
# otherwise rounding noise in the incremental sums can make two moves undo
# each other forever
REL_EPS = 1e-10


class InfeasibleBoundsError(ValueError):
    pass


class ClusterMode(str, enum.Enum):
    ES = "es"
    VS = "vs"


def cluster_bounds(K: int, tau_p: int, mode: ClusterMode | str) -> tuple[int, int]:
    """Capacity bounds (lb, ub) for equal-size or variable-size clusters.

    Equal size uses floor/ceil of K/tau_p so that it stays feasible when
    tau_p does not divide K. Variable size keeps every pilot in use.
    """
    mode = ClusterMode(mode)
    if mode is ClusterMode.ES:
        return K // tau_p, -(-K // tau_p)
    return (1 if K >= tau_p else 0), K


@dataclass
class ImsParams:
    initial_solutions: int = 10
    t_max: float = 1.0
    alpha: int = 20
    eta_w: int = 3
    eta_w2: int | None = None  # None means K
    theta: float = 1.5
    mode: ClusterMode = ClusterMode.ES
    lb: int | None = None
    ub: int | None = None
    weighted_swap: bool = True
    # deterministic budget in local-search sweeps; replaces t_max when set
    max_sweeps: int | None = None

    def __post_init__(self):
        self.mode = ClusterMode(self.mode)
        if self.initial_solutions < 1 or self.alpha < 1 or self.eta_w < 0 or self.theta < 0:
            raise ValueError("invalid IMS parameters")

    def bounds(self, K: int, tau_p: int) -> tuple[int, int]:
        lb, ub = cluster_bounds(K, tau_p, self.mode)
        return (lb if self.lb is None else self.lb), (ub if self.ub is None else self.ub)

    def robust_strength(self, K: int, tau_p: int) -> int:
        return int(round(self.theta * K / tau_p))


@dataclass
class SolverResult:
    assignment: PilotSolution
    fitness: float
    iterations: int = 0
    sweeps: int = 0
    elapsed: float = 0.0
    trace: list = field(default_factory=list)

    @property
    def pilots(self) -> np.ndarray:
        return self.assignment.p


def _kernel_state(rng: np.random.Generator) -> np.ndarray:
    return np.array([rng.integers(0, 2**63, dtype=np.int64)], dtype=np.uint64)


def _eps(dm: DiversityMatrix) -> float:
    return REL_EPS * float(dm.d.max()) if dm.d.size else 0.0


def initial_feasible(K: int, tau_p: int, lb: int, ub: int, rng: np.random.Generator) -> np.ndarray:
    """Random assignment with every cluster size in [lb, ub].

    Each pilot first receives ``lb`` random UEs; the rest draw random pilots,
    redrawing whenever the chosen cluster is already full.
    """
    if tau_p < 1 or lb < 0 or ub < lb or not (tau_p * lb <= K <= tau_p * ub):
        raise InfeasibleBoundsError(f"cannot place K={K} UEs in {tau_p} clusters of size [{lb}, {ub}]")
    order = rng.permutation(K)
    p = np.empty(K, dtype=np.int64)
    sizes = np.zeros(tau_p, dtype=np.int64)
    head = tau_p * lb
    p[order[:head]] = np.repeat(np.arange(tau_p), lb)
    sizes += lb
    for k in order[head:]:
        while True:
            q = rng.integers(tau_p)
            if sizes[q] < ub:
                break
        p[k] = q
        sizes[q] += 1
    return p


def local_search(sol: PilotSolution, mm: np.ndarray, dm: DiversityMatrix, *, weighted: bool = True,
                 use_one_moves: bool = True, max_sweeps: int = 0, trace: list | None = None) -> int:
    """Descend to a local optimum of the OneMove + SwapMove neighbourhoods, in place.

    Returns the number of sweeps. When ``trace`` is given the fitness after
    every sweep is appended to it.
    """
    eps = _eps(dm)
    if trace is None:
        return kernels.local_search(sol.p, sol.c, sol.s, mm, dm.d, sol.lb, sol.ub,
                                    weighted, use_one_moves, eps, max_sweeps)
    trace.append(sol.fitness())
    sweeps = 0
    while max_sweeps <= 0 or sweeps < max_sweeps:
        before = sol.p.copy()
        sweeps += kernels.local_search(sol.p, sol.c, sol.s, mm, dm.d, sol.lb, sol.ub,
                                       weighted, use_one_moves, eps, 1)
        trace.append(sol.fitness())
        if np.array_equal(before, sol.p):
            break
    return sweeps


def weak_perturbation(sol: PilotSolution, mm: np.ndarray, dm: DiversityMatrix, eta_w: int,
                      eta_w2: int, state: np.ndarray, weighted: bool = True) -> None:
    """``eta_w`` rounds, each applying the best of ``eta_w2 + 1`` random neighbours."""
    kernels.weak_perturbation(sol.p, sol.c, sol.s, mm, dm.d, sol.lb, sol.ub, weighted,
                              eta_w, eta_w2, state)


def robust_perturbation(sol: PilotSolution, mm: np.ndarray, dm: DiversityMatrix, eta_s: int,
                        state: np.ndarray) -> None:
    """Apply ``eta_s`` random feasible moves whatever their effect on fitness."""
    kernels.robust_perturbation(sol.p, sol.c, sol.s, mm, dm.d, sol.lb, sol.ub, eta_s, state)


def ims(dm: DiversityMatrix, tau_p: int, params: ImsParams | None = None,
        rng: np.random.Generator | None = None, observer=None) -> SolverResult:
    """Iterative maxima search for the capacitated diverse clustering problem.

    Multi-start local search, then alternating weak perturbation plus local
    search (until ``alpha`` consecutive non-improving rounds) and a robust
    perturbation, until the time or sweep budget runs out. ``observer``, if
    given, is called with the working solution after every local search and
    every perturbation.
    """
    see = observer or (lambda sol: None)
    params = params or ImsParams()
    rng = rng if rng is not None else np.random.default_rng()
    K = dm.K
    lb, ub = params.bounds(K, tau_p)
    eta_w2 = K if params.eta_w2 is None else params.eta_w2
    eta_s = params.robust_strength(K, tau_p)
    state = _kernel_state(rng)
    eps = _eps(dm)
    start = time.perf_counter()
    sweeps = 0

    def exhausted():
        if params.max_sweeps is not None:
            return sweeps >= params.max_sweeps
        return time.perf_counter() - start > params.t_max

    best = None
    best_f = -math.inf
    for _ in range(params.initial_solutions):
        sol = make_solution(initial_feasible(K, tau_p, lb, ub, rng), dm, tau_p, lb, ub)
        mm = build_move_matrix(sol, dm)
        sweeps += local_search(sol, mm, dm, weighted=params.weighted_swap)
        see(sol)
        f = sol.fitness()
        if f > best_f:
            best, best_f = sol, f

    current = best.copy()
    mm = build_move_matrix(current, dm)
    star, star_f = best.copy(), best_f
    trace = [(time.perf_counter() - start, star_f)]
    iterations = 0
    while not exhausted():
        ctr = 0
        while ctr < params.alpha:
            weak_perturbation(current, mm, dm, params.eta_w, eta_w2, state, params.weighted_swap)
            see(current)
            sweeps += local_search(current, mm, dm, weighted=params.weighted_swap)
            see(current)
            f = current.fitness()
            if f > star_f + eps:
                star, star_f = current.copy(), f
                trace.append((time.perf_counter() - start, star_f))
                ctr = 0
            else:
                ctr += 1
        robust_perturbation(current, mm, dm, eta_s, state)
        see(current)
        mm = resync(current, dm)
        iterations += 1

    resync(star, dm)
    return SolverResult(star, fitness(star.p, dm, tau_p), iterations=iterations, sweeps=sweeps,
                        elapsed=time.perf_counter() - start, trace=trace)


def random_assignment(K: int, tau_p: int, rng: np.random.Generator,
                      dm: DiversityMatrix | None = None) -> PilotSolution:
    """Independent uniform pilot per UE, no capacity constraint."""
    p = rng.integers(0, tau_p, size=K).astype(np.int64)
    return _unconstrained(p, tau_p, dm)


def _unconstrained(p, tau_p, dm):
    if dm is not None:
        return make_solution(p, dm, tau_p, 0, len(p))
    s = np.bincount(p, minlength=tau_p).astype(np.int64)
    return PilotSolution(p, np.full(tau_p, np.nan), s, 0, len(p))


def greedy_assignment(beta: np.ndarray, tau_p: int, *, rho_p: float, rho_u: float, L: int,
                      n_iters: int, rng: np.random.Generator,
                      dm: DiversityMatrix | None = None) -> PilotSolution:
    """Start random, then repeatedly move the weakest UE to the least loaded pilot.

    "Least loaded" is the pilot whose current users have the smallest total
    large-scale gain summed over all APs. Ties go to the lowest pilot index.
    """
    beta = np.asarray(beta, dtype=float)
    K = beta.shape[1]
    p = rng.integers(0, tau_p, size=K).astype(np.int64)
    ue_load = beta.sum(axis=0)
    ones = np.ones(K)
    for _ in range(n_iters):
        gamma = estimation_stats(beta, p, tau_p, rho_p).gamma
        worst = int(np.argmin(ul_rate(beta, gamma, p, ones, L, rho_u)))
        load = np.bincount(p, weights=ue_load, minlength=tau_p)
        load[p[worst]] -= ue_load[worst]
        p[worst] = int(np.argmin(load))
    return _unconstrained(p, tau_p, dm)


def repulsive_assignment(dm: DiversityMatrix, tau_p: int, rng: np.random.Generator) -> PilotSolution:
    """Random equal-size clusters improved by pairwise swaps of the raw diversity sum."""
    K = dm.K
    lb, ub = cluster_bounds(K, tau_p, ClusterMode.ES)
    p = np.empty(K, dtype=np.int64)
    p[rng.permutation(K)] = np.arange(K) % tau_p
    sol = make_solution(p, dm, tau_p, lb, ub)
    mm = build_move_matrix(sol, dm)
    local_search(sol, mm, dm, weighted=False, use_one_moves=False)
    resync(sol, dm)
    return sol


def unique_pilots(K: int) -> np.ndarray:
    """Private pilot per UE; the contamination-free reference."""
    return np.arange(K, dtype=np.int64)
