"""Diverse clustering core: diversity matrices, solutions, fitness and move deltas.

A pilot assignment is a partition of the K UEs into tau_p clusters; the
fitness rewards diverse clusters and divides each cluster's pairwise sum by
its size. Pilot indices are 0-based throughout.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .scenario import pairwise_wrap_distance


class InfeasibleMoveError(ValueError):
    pass


class FeatureSource(str, enum.Enum):
    LOCATION = "location"
    LSF = "lsf"
    BOTH = "both"


@dataclass(frozen=True)
class DiversityMatrix:
    d: np.ndarray
    feature_source: FeatureSource = FeatureSource.LOCATION

    def __post_init__(self):
        d = np.ascontiguousarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("diversity matrix must be square")
        if not np.allclose(d, d.T, rtol=0, atol=0) or np.any(np.diag(d) != 0) or np.any(d < 0):
            raise ValueError("diversity matrix must be symmetric, non-negative, zero diagonal")
        object.__setattr__(self, "d", d)

    @property
    def K(self) -> int:
        return self.d.shape[0]


def _euclid(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(d, 0.0)
    return d


def _zscore(x: np.ndarray) -> np.ndarray:
    std = x.std(axis=0)
    std[std == 0] = 1.0
    return (x - x.mean(axis=0)) / std


def location_features(ue_positions, area_km: float, loc_error_std_m: float = 0.0,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """UE coordinates as seen by the pilot scheduler, with Gaussian position error."""
    pos = np.asarray(ue_positions, dtype=float)
    if loc_error_std_m > 0:
        if rng is None:
            raise ValueError("an rng is required when loc_error_std_m > 0")
        pos = pos + rng.normal(0.0, loc_error_std_m / 1000.0, size=pos.shape)
        pos = np.mod(pos, area_km)
    return pos


def build_diversity(source: FeatureSource | str, *, ue_positions=None, area_km: float = 1.0,
                    beta=None, loc_error_std_m: float = 0.0,
                    rng: np.random.Generator | None = None) -> DiversityMatrix:
    """Euclidean diversity between UEs over the chosen features.

    location: wraparound distance between (possibly perturbed) UE positions.
    lsf: distance between the per-UE vectors of large-scale gains in dB.
    both: z-scored coordinates and dB gains concatenated.
    """
    source = FeatureSource(source)
    if source is FeatureSource.LOCATION:
        pos = location_features(ue_positions, area_km, loc_error_std_m, rng)
        d = pairwise_wrap_distance(pos, pos, area_km)
        np.fill_diagonal(d, 0.0)
    elif source is FeatureSource.LSF:
        d = _euclid(10.0 * np.log10(np.asarray(beta, dtype=float)).T)
    else:
        pos = location_features(ue_positions, area_km, loc_error_std_m, rng)
        feats = np.hstack([_zscore(pos), _zscore(10.0 * np.log10(np.asarray(beta, dtype=float)).T)])
        d = _euclid(feats)
    d = 0.5 * (d + d.T)
    return DiversityMatrix(d, source)


@dataclass
class PilotSolution:
    """Assignment vector plus cached per-cluster diversity sums and sizes."""
    p: np.ndarray
    c: np.ndarray
    s: np.ndarray
    lb: int
    ub: int

    @property
    def K(self) -> int:
        return len(self.p)

    @property
    def tau_p(self) -> int:
        return len(self.s)

    def copy(self) -> "PilotSolution":
        return PilotSolution(self.p.copy(), self.c.copy(), self.s.copy(), self.lb, self.ub)

    def is_feasible(self) -> bool:
        return bool(np.all(self.s >= self.lb) and np.all(self.s <= self.ub) and self.s.sum() == self.K)

    def fitness(self) -> float:
        """Fitness from the cached sums (fast, subject to incremental drift)."""
        nz = self.s > 0
        return float(np.sum(self.c[nz] / self.s[nz]))


def cluster_sums(p: np.ndarray, d: np.ndarray, tau_p: int) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.int64)
    onehot = np.zeros((len(p), tau_p))
    onehot[np.arange(len(p)), p] = 1.0
    c = 0.5 * np.einsum("kq,kj,jq->q", onehot, d, onehot)
    s = np.bincount(p, minlength=tau_p).astype(np.int64)
    return c, s


def make_solution(p, dm: DiversityMatrix | np.ndarray, tau_p: int, lb: int = 0, ub: int | None = None) -> PilotSolution:
    d = dm.d if isinstance(dm, DiversityMatrix) else np.asarray(dm, dtype=float)
    p = np.ascontiguousarray(p, dtype=np.int64)
    if len(p) and (p.min() < 0 or p.max() >= tau_p):
        raise ValueError(f"pilot indices must lie in [0, {tau_p})")
    c, s = cluster_sums(p, d, tau_p)
    return PilotSolution(p, c, s, lb, len(p) if ub is None else ub)


def fitness(p, dm: DiversityMatrix | np.ndarray, tau_p: int | None = None) -> float:
    """Size-regularised diversity sum, recomputed from scratch in O(K^2)."""
    d = dm.d if isinstance(dm, DiversityMatrix) else np.asarray(dm, dtype=float)
    if isinstance(p, PilotSolution):
        tau_p = p.tau_p
        p = p.p
    p = np.asarray(p, dtype=np.int64)
    if tau_p is None:
        tau_p = int(p.max()) + 1
    total = 0.0
    for q in range(tau_p):
        members = np.flatnonzero(p == q)
        if len(members) > 1:
            total += d[np.ix_(members, members)].sum() / 2.0 / len(members)
    return float(total)


def build_move_matrix(sol: PilotSolution, dm: DiversityMatrix) -> np.ndarray:
    """m[k, q] = total diversity between UE k and the members of cluster q."""
    return kernels.build_move_matrix(sol.p, dm.d, sol.tau_p)


def delta_one_move(sol: PilotSolution, mm: np.ndarray, k: int, j: int) -> float:
    """Exact fitness change of moving UE ``k`` to cluster ``j``."""
    i = sol.p[k]
    if i == j:
        raise InfeasibleMoveError(f"UE {k} already uses pilot {j}")
    if sol.s[i] <= sol.lb or sol.s[j] >= sol.ub:
        raise InfeasibleMoveError(f"moving UE {k} from {i} to {j} violates [{sol.lb}, {sol.ub}]")
    return float(kernels.delta_one(sol.p, sol.c, sol.s, mm, k, j))


def delta_swap(sol: PilotSolution, mm: np.ndarray, dm: DiversityMatrix, k: int, k2: int,
               weighted: bool = True) -> float:
    """Fitness change of exchanging the pilots of ``k`` and ``k2``.

    With ``weighted=False`` this is the raw change in the unregularised
    cluster sums, which ranks swaps like the fitness only when all clusters
    have the same size.
    """
    if sol.p[k] == sol.p[k2]:
        raise InfeasibleMoveError(f"UEs {k} and {k2} share pilot {sol.p[k]}")
    return float(kernels.delta_swap(sol.p, sol.c, sol.s, mm, dm.d, k, k2, weighted))


def apply_move(sol: PilotSolution, mm: np.ndarray, dm: DiversityMatrix, k: int, j: int) -> None:
    i = sol.p[k]
    if i == j or sol.s[i] <= sol.lb or sol.s[j] >= sol.ub:
        raise InfeasibleMoveError(f"moving UE {k} from {i} to {j} is infeasible")
    kernels.apply_one(sol.p, sol.c, sol.s, mm, dm.d, k, j)


def apply_swap(sol: PilotSolution, mm: np.ndarray, dm: DiversityMatrix, k: int, k2: int) -> None:
    if sol.p[k] == sol.p[k2]:
        raise InfeasibleMoveError(f"UEs {k} and {k2} share pilot {sol.p[k]}")
    kernels.apply_swap(sol.p, sol.c, sol.s, mm, dm.d, k, k2)


def resync(sol: PilotSolution, dm: DiversityMatrix) -> np.ndarray:
    """Recompute cached sums and the move matrix from scratch; returns the new matrix."""
    sol.c[:], sol.s[:] = cluster_sums(sol.p, dm.d, sol.tau_p)
    return build_move_matrix(sol, dm)
