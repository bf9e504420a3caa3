"""Pure-Python local-search kernels.

Reference implementation of everything in ``_kernels.pyx``. The arithmetic is
written in the same order as the compiled version so that both backends
produce bit-identical search trajectories for the same seed.

Array conventions (all mutated in place):
    p  int64[K]       pilot index per UE (0-based)
    c  float64[tau]   sum of pairwise diversity inside each cluster
    s  int64[tau]     cluster sizes
    m  float64[K,tau] m[k, q] = sum of d[k, k'] over UEs k' on pilot q
    d  float64[K,K]   diversity matrix
    state uint64[1]   splitmix64 state
"""
import numpy as np

MASK64 = (1 << 64) - 1
MAX_TRIES = 1000
NO_MOVE = 0
ONE_MOVE = 1
SWAP_MOVE = 2


def next_u64(state):
    z = (int(state[0]) + 0x9E3779B97F4A7C15) & MASK64
    state[0] = z
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def randbelow(state, n):
    return int((next_u64(state) >> 11) * (1.0 / 9007199254740992.0) * n)


def delta_one(p, c, s, m, k, j):
    i = p[k]
    si = s[i]
    sj = s[j]
    gain_j = (c[j] + m[k, j]) / (sj + 1)
    if sj > 0:
        gain_j -= c[j] / sj
    loss_i = -c[i] / si
    if si > 1:
        loss_i += (c[i] - m[k, i]) / (si - 1)
    return gain_j + loss_i


def delta_swap(p, c, s, m, d, k, k2, weighted):
    i = p[k]
    j = p[k2]
    dci = m[k2, i] - m[k, i] - d[k, k2]
    dcj = m[k, j] - m[k2, j] - d[k, k2]
    if weighted:
        return dci / s[i] + dcj / s[j]
    return dci + dcj


def apply_one(p, c, s, m, d, k, j):
    i = p[k]
    c[i] -= m[k, i]
    c[j] += m[k, j]
    s[i] -= 1
    s[j] += 1
    p[k] = j
    K = len(p)
    for u in range(K):
        m[u, i] -= d[u, k]
        m[u, j] += d[u, k]


def apply_swap(p, c, s, m, d, k, k2):
    i = p[k]
    j = p[k2]
    c[i] += m[k2, i] - m[k, i] - d[k, k2]
    c[j] += m[k, j] - m[k2, j] - d[k, k2]
    p[k] = j
    p[k2] = i
    K = len(p)
    for u in range(K):
        diff = d[u, k2] - d[u, k]
        m[u, i] += diff
        m[u, j] -= diff


def local_search(p, c, s, m, d, lb, ub, weighted, use_one, eps, max_sweeps):
    """First-improvement descent over OneMove then SwapMove sweeps.

    Returns the number of sweeps run. Stops after a sweep with no accepted
    move, or after ``max_sweeps`` sweeps when that is positive.
    """
    K = len(p)
    tau = len(c)
    sweeps = 0
    improved = True
    while improved and (max_sweeps <= 0 or sweeps < max_sweeps):
        improved = False
        sweeps += 1
        if use_one:
            for k in range(K):
                for q in range(tau):
                    i = p[k]
                    if q == i or s[i] <= lb or s[q] >= ub:
                        continue
                    if delta_one(p, c, s, m, k, q) > eps:
                        apply_one(p, c, s, m, d, k, q)
                        improved = True
        for k in range(K):
            for k2 in range(k + 1, K):
                if p[k] == p[k2]:
                    continue
                if delta_swap(p, c, s, m, d, k, k2, weighted) > eps:
                    apply_swap(p, c, s, m, d, k, k2)
                    improved = True
    return sweeps


def random_move(p, s, lb, ub, state):
    """Uniform draw from the feasible OneMove/SwapMove neighbourhood by rejection.

    Returns ``(kind, a, b)``; kind is NO_MOVE when nothing feasible was hit.
    """
    K = len(p)
    tau = len(s)
    n1 = K * (tau - 1)
    n2 = K * (K - 1) // 2
    total = n1 + n2
    if total == 0:
        return NO_MOVE, 0, 0
    for _ in range(MAX_TRIES):
        r = randbelow(state, total)
        if r < n1:
            k = r // (tau - 1)
            q = r % (tau - 1)
            i = p[k]
            j = q if q < i else q + 1
            if s[i] > lb and s[j] < ub:
                return ONE_MOVE, k, j
        else:
            r -= n1
            k = 0
            while r >= K - 1 - k:
                r -= K - 1 - k
                k += 1
            k2 = k + 1 + r
            if p[k] != p[k2]:
                return SWAP_MOVE, k, k2
    return NO_MOVE, 0, 0


def _move_delta(p, c, s, m, d, kind, a, b, weighted):
    if kind == ONE_MOVE:
        return delta_one(p, c, s, m, a, b)
    return delta_swap(p, c, s, m, d, a, b, weighted)


def _apply(p, c, s, m, d, kind, a, b):
    if kind == ONE_MOVE:
        apply_one(p, c, s, m, d, a, b)
    elif kind == SWAP_MOVE:
        apply_swap(p, c, s, m, d, a, b)


def weak_perturbation(p, c, s, m, d, lb, ub, weighted, eta_w, eta_w2, state):
    for _ in range(eta_w):
        kind, a, b = random_move(p, s, lb, ub, state)
        if kind == NO_MOVE:
            return
        best = _move_delta(p, c, s, m, d, kind, a, b, weighted)
        for _ in range(eta_w2):
            kind2, a2, b2 = random_move(p, s, lb, ub, state)
            if kind2 == NO_MOVE:
                continue
            delta = _move_delta(p, c, s, m, d, kind2, a2, b2, weighted)
            if delta > best:
                best = delta
                kind, a, b = kind2, a2, b2
        _apply(p, c, s, m, d, kind, a, b)


def robust_perturbation(p, c, s, m, d, lb, ub, eta_s, state):
    for _ in range(eta_s):
        kind, a, b = random_move(p, s, lb, ub, state)
        if kind == NO_MOVE:
            return
        _apply(p, c, s, m, d, kind, a, b)


def build_move_matrix(p, d, tau):
    K = len(p)
    onehot = np.zeros((K, tau))
    onehot[np.arange(K), p] = 1.0
    return np.ascontiguousarray(d @ onehot)
