# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled local-search kernels; mirror of ``_kernels_py`` operation for operation."""
import numpy as np

from libc.stdint cimport uint64_t, int64_t

cdef enum:
    MAX_TRIES = 1000

NO_MOVE = 0
ONE_MOVE = 1
SWAP_MOVE = 2


cdef inline uint64_t _next_u64(uint64_t[::1] state) nogil:
    cdef uint64_t z = state[0] + <uint64_t>0x9E3779B97F4A7C15ULL
    state[0] = z
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline Py_ssize_t _randbelow(uint64_t[::1] state, Py_ssize_t n) nogil:
    return <Py_ssize_t>(<double>(_next_u64(state) >> 11) * (1.0 / 9007199254740992.0) * n)


def next_u64(uint64_t[::1] state):
    return _next_u64(state)


def randbelow(uint64_t[::1] state, Py_ssize_t n):
    return _randbelow(state, n)


cdef inline double _delta_one(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
                              Py_ssize_t k, Py_ssize_t j) nogil:
    cdef Py_ssize_t i = p[k]
    cdef int64_t si = s[i]
    cdef int64_t sj = s[j]
    cdef double gain_j = (c[j] + m[k, j]) / (sj + 1)
    cdef double loss_i
    if sj > 0:
        gain_j -= c[j] / sj
    loss_i = -c[i] / si
    if si > 1:
        loss_i += (c[i] - m[k, i]) / (si - 1)
    return gain_j + loss_i


cdef inline double _delta_swap(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
                               double[:, ::1] d, Py_ssize_t k, Py_ssize_t k2, bint weighted) nogil:
    cdef Py_ssize_t i = p[k]
    cdef Py_ssize_t j = p[k2]
    cdef double dci = m[k2, i] - m[k, i] - d[k, k2]
    cdef double dcj = m[k, j] - m[k2, j] - d[k, k2]
    if weighted:
        return dci / s[i] + dcj / s[j]
    return dci + dcj


cdef inline void _apply_one(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
                            double[:, ::1] d, Py_ssize_t k, Py_ssize_t j) nogil:
    cdef Py_ssize_t i = p[k]
    cdef Py_ssize_t u
    cdef Py_ssize_t K = p.shape[0]
    c[i] -= m[k, i]
    c[j] += m[k, j]
    s[i] -= 1
    s[j] += 1
    p[k] = j
    for u in range(K):
        m[u, i] -= d[u, k]
        m[u, j] += d[u, k]


cdef inline void _apply_swap(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
                             double[:, ::1] d, Py_ssize_t k, Py_ssize_t k2) nogil:
    cdef Py_ssize_t i = p[k]
    cdef Py_ssize_t j = p[k2]
    cdef Py_ssize_t u
    cdef Py_ssize_t K = p.shape[0]
    cdef double diff
    c[i] += m[k2, i] - m[k, i] - d[k, k2]
    c[j] += m[k, j] - m[k2, j] - d[k, k2]
    p[k] = j
    p[k2] = i
    for u in range(K):
        diff = d[u, k2] - d[u, k]
        m[u, i] += diff
        m[u, j] -= diff


def delta_one(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
              Py_ssize_t k, Py_ssize_t j):
    return _delta_one(p, c, s, m, k, j)


def delta_swap(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
               double[:, ::1] d, Py_ssize_t k, Py_ssize_t k2, bint weighted):
    return _delta_swap(p, c, s, m, d, k, k2, weighted)


def apply_one(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
              double[:, ::1] d, Py_ssize_t k, Py_ssize_t j):
    _apply_one(p, c, s, m, d, k, j)


def apply_swap(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
               double[:, ::1] d, Py_ssize_t k, Py_ssize_t k2):
    _apply_swap(p, c, s, m, d, k, k2)


def local_search(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
                 double[:, ::1] d, int64_t lb, int64_t ub, bint weighted, bint use_one,
                 double eps, long max_sweeps):
    cdef Py_ssize_t K = p.shape[0]
    cdef Py_ssize_t tau = c.shape[0]
    cdef Py_ssize_t k, k2, q, i
    cdef long sweeps = 0
    cdef bint improved = True
    with nogil:
        while improved and (max_sweeps <= 0 or sweeps < max_sweeps):
            improved = False
            sweeps += 1
            if use_one:
                for k in range(K):
                    for q in range(tau):
                        i = p[k]
                        if q == i or s[i] <= lb or s[q] >= ub:
                            continue
                        if _delta_one(p, c, s, m, k, q) > eps:
                            _apply_one(p, c, s, m, d, k, q)
                            improved = True
            for k in range(K):
                for k2 in range(k + 1, K):
                    if p[k] == p[k2]:
                        continue
                    if _delta_swap(p, c, s, m, d, k, k2, weighted) > eps:
                        _apply_swap(p, c, s, m, d, k, k2)
                        improved = True
    return sweeps


cdef int _random_move(int64_t[::1] p, int64_t[::1] s, int64_t lb, int64_t ub,
                      uint64_t[::1] state, Py_ssize_t* a, Py_ssize_t* b) nogil:
    cdef Py_ssize_t K = p.shape[0]
    cdef Py_ssize_t tau = s.shape[0]
    cdef Py_ssize_t n1 = K * (tau - 1)
    cdef Py_ssize_t n2 = K * (K - 1) // 2
    cdef Py_ssize_t total = n1 + n2
    cdef Py_ssize_t r, k, q, i, j, k2
    cdef int t
    if total == 0:
        return 0
    for t in range(MAX_TRIES):
        r = _randbelow(state, total)
        if r < n1:
            k = r // (tau - 1)
            q = r % (tau - 1)
            i = p[k]
            j = q if q < i else q + 1
            if s[i] > lb and s[j] < ub:
                a[0] = k
                b[0] = j
                return 1
        else:
            r -= n1
            k = 0
            while r >= K - 1 - k:
                r -= K - 1 - k
                k += 1
            k2 = k + 1 + r
            if p[k] != p[k2]:
                a[0] = k
                b[0] = k2
                return 2
    return 0


def random_move(int64_t[::1] p, int64_t[::1] s, int64_t lb, int64_t ub, uint64_t[::1] state):
    cdef Py_ssize_t a = 0, b = 0
    cdef int kind = _random_move(p, s, lb, ub, state, &a, &b)
    return kind, a, b


cdef inline double _move_delta(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
                               double[:, ::1] d, int kind, Py_ssize_t a, Py_ssize_t b,
                               bint weighted) nogil:
    if kind == 1:
        return _delta_one(p, c, s, m, a, b)
    return _delta_swap(p, c, s, m, d, a, b, weighted)


cdef inline void _apply(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
                        double[:, ::1] d, int kind, Py_ssize_t a, Py_ssize_t b) nogil:
    if kind == 1:
        _apply_one(p, c, s, m, d, a, b)
    elif kind == 2:
        _apply_swap(p, c, s, m, d, a, b)


def weak_perturbation(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
                      double[:, ::1] d, int64_t lb, int64_t ub, bint weighted,
                      long eta_w, long eta_w2, uint64_t[::1] state):
    cdef long it, jt
    cdef int kind, kind2
    cdef Py_ssize_t a = 0, b = 0, a2 = 0, b2 = 0
    cdef double best, delta
    with nogil:
        for it in range(eta_w):
            kind = _random_move(p, s, lb, ub, state, &a, &b)
            if kind == 0:
                break
            best = _move_delta(p, c, s, m, d, kind, a, b, weighted)
            for jt in range(eta_w2):
                kind2 = _random_move(p, s, lb, ub, state, &a2, &b2)
                if kind2 == 0:
                    continue
                delta = _move_delta(p, c, s, m, d, kind2, a2, b2, weighted)
                if delta > best:
                    best = delta
                    kind = kind2
                    a = a2
                    b = b2
            _apply(p, c, s, m, d, kind, a, b)


def robust_perturbation(int64_t[::1] p, double[::1] c, int64_t[::1] s, double[:, ::1] m,
                        double[:, ::1] d, int64_t lb, int64_t ub, long eta_s,
                        uint64_t[::1] state):
    cdef long it
    cdef int kind
    cdef Py_ssize_t a = 0, b = 0
    with nogil:
        for it in range(eta_s):
            kind = _random_move(p, s, lb, ub, state, &a, &b)
            if kind == 0:
                break
            _apply(p, c, s, m, d, kind, a, b)


def build_move_matrix(p, d, tau):
    K = len(p)
    onehot = np.zeros((K, tau))
    onehot[np.arange(K), p] = 1.0
    return np.ascontiguousarray(d @ onehot)
