"""Exhaustive search over pilot assignments modulo pilot relabelling.

Assignments are enumerated as restricted growth strings: UE 0 gets label 0
and every later UE either reuses a label already seen or opens the next one.
Each set partition therefore appears exactly once.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .dcp import DiversityMatrix, PilotSolution, make_solution

DEFAULT_BUDGET = 10**7
CHUNK = 200_000


class BudgetExceededError(ValueError):
    pass


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


def count_states(K: int, tau_p: int) -> int:
    """Number of set partitions of K items into at most tau_p blocks."""
    return sum(stirling2(K, j) for j in range(1, min(K, tau_p) + 1))


def _feasible_rows(rgs: np.ndarray, K: int, tau_p: int, lb: int, ub: int) -> np.ndarray:
    """Keep partial assignments that can still be completed within [lb, ub]."""
    remaining = K - rgs.shape[1]
    sizes = np.stack([(rgs == q).sum(axis=1) for q in range(tau_p)], axis=1)
    deficit = np.maximum(lb - sizes, 0).sum(axis=1)
    ok = np.all(sizes <= ub, axis=1) & (deficit <= remaining)
    return rgs[ok]


def enumerate_assignments(K: int, tau_p: int, lb: int = 0, ub: int | None = None,
                          chunk: int = CHUNK):
    """Yield int8 arrays of canonical assignments, complete and feasible, in chunks."""
    ub = K if ub is None else ub

    def expand(block: np.ndarray):
        depth = block.shape[1]
        if depth == K:
            sizes = np.stack([(block == q).sum(axis=1) for q in range(tau_p)], axis=1)
            ok = np.all((sizes >= lb) & (sizes <= ub), axis=1)
            if ok.any():
                yield block[ok]
            return
        opened = block.max(axis=1)
        parts = []
        for label in range(min(depth + 1, tau_p)):
            rows = block[opened + 1 >= label]
            if len(rows):
                parts.append(np.hstack([rows, np.full((len(rows), 1), label, dtype=np.int8)]))
        grown = _feasible_rows(np.vstack(parts), K, tau_p, lb, ub)
        for start in range(0, len(grown), chunk):
            yield from expand(grown[start:start + chunk])

    yield from expand(np.zeros((1, 1), dtype=np.int8))


def batch_fitness(P: np.ndarray, d: np.ndarray, tau_p: int) -> np.ndarray:
    """Fitness of many assignments at once (rows of ``P``)."""
    X = (P[:, :, None] == np.arange(tau_p)[None, None, :]).astype(float)
    c = 0.5 * np.einsum("nkq,kj,njq->nq", X, d, X, optimize=True)
    s = X.sum(axis=1)
    return np.where(s > 0, c / np.where(s > 0, s, 1.0), 0.0).sum(axis=1)


def batch_sum_ul_rate(P: np.ndarray, beta: np.ndarray, tau_p: int, *, rho_p: float, rho_u: float,
                      L: int) -> np.ndarray:
    """Uplink sum rate at full power for many assignments at once."""
    n, K = P.shape
    X = (P[:, :, None] == np.arange(tau_p)[None, None, :]).astype(float)
    group = np.einsum("mk,nkq->nmq", beta, X)
    cont = np.take_along_axis(group, P[:, None, :].astype(np.intp).repeat(beta.shape[0], axis=1), axis=2)
    snr = tau_p * rho_p
    c = np.sqrt(snr) * beta[None] / (snr * cont + 1.0)
    gamma = np.sqrt(snr) * beta[None] * c
    sum_gamma = gamma.sum(axis=1)
    signal = L * L * rho_u * sum_gamma ** 2
    noncoh = L * rho_u * np.einsum("nmk,m->nk", gamma, beta.sum(axis=1))
    coh = np.einsum("nmk,mj->nkj", gamma / beta[None], beta)
    same = P[:, :, None] == P[:, None, :]
    same[:, np.arange(K), np.arange(K)] = False
    contam = L * L * rho_u * np.where(same, coh ** 2, 0.0).sum(axis=2)
    sinr = signal / (contam + noncoh + L * sum_gamma)
    return np.log2(1.0 + sinr).sum(axis=1)


def exhaustive_assignment(K: int, tau_p: int, objective, lb: int = 0, ub: int | None = None,
                          budget: int = DEFAULT_BUDGET) -> tuple[np.ndarray, float]:
    """Best canonical assignment under ``objective`` (a batch scorer of assignment rows).

    Returns the assignment and its score; the first maximiser wins ties.
    """
    n_states = count_states(K, tau_p)
    if n_states > budget:
        raise BudgetExceededError(f"{n_states} partitions exceed the budget of {budget}")
    best, best_val = None, -np.inf
    for block in enumerate_assignments(K, tau_p, lb, ub):
        vals = objective(block)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best, best_val = block[i].astype(np.int64), float(vals[i])
    if best is None:
        raise ValueError(f"no feasible assignment of K={K} into {tau_p} clusters of size [{lb}, {ub}]")
    return best, best_val


def exhaustive_dcp(dm: DiversityMatrix, tau_p: int, lb: int = 0, ub: int | None = None,
                   budget: int = DEFAULT_BUDGET) -> PilotSolution:
    ub = dm.K if ub is None else ub
    p, _ = exhaustive_assignment(dm.K, tau_p, lambda P: batch_fitness(P, dm.d, tau_p), lb, ub, budget)
    return make_solution(p, dm, tau_p, lb, ub)


def exhaustive_sum_rate(beta: np.ndarray, tau_p: int, *, rho_p: float, rho_u: float, L: int,
                        lb: int = 0, ub: int | None = None, budget: int = DEFAULT_BUDGET,
                        batch: int = 4096) -> np.ndarray:
    K = beta.shape[1]

    def score(P):
        return np.concatenate([batch_sum_ul_rate(P[i:i + batch], beta, tau_p, rho_p=rho_p,
                                                 rho_u=rho_u, L=L) for i in range(0, len(P), batch)])

    p, _ = exhaustive_assignment(K, tau_p, score, lb, ub, budget)
    return p
