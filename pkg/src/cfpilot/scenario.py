"""Experiment configuration, random network generation and wraparound geometry.

All coordinates are in km. A square area of side ``area_km`` is treated as a
torus so that every AP/UE sees the same statistical neighbourhood.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

BOLTZMANN = 1.381e-23


class InvalidDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class RadioParams:
    bandwidth_hz: float = 20e6
    carrier_freq_mhz: float = 1900.0
    ap_height_m: float = 15.0
    ue_height_m: float = 1.65
    d0_m: float = 10.0
    d1_m: float = 50.0
    shadow_std_db: float = 8.0
    noise_figure: float = 9.0  # dB
    noise_temp_k: float = 290.0
    pilot_power_mw: float = 100.0
    ul_power_mw: float = 100.0
    dl_power_mw: float = 200.0
    coherence_samples: int = 200
    num_pilots: int = 10

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            # shadowing may be switched off entirely; a 0 dB noise figure is an ideal receiver
            if f.name in ("shadow_std_db", "noise_figure"):
                if value < 0:
                    raise ValueError(f"{f.name} must be non-negative")
                continue
            if value <= 0:
                raise ValueError(f"{f.name} must be positive, got {value!r}")
        if self.d0_m >= self.d1_m:
            raise ValueError("d0_m must be smaller than d1_m")
        if self.num_pilots > self.coherence_samples:
            raise ValueError("num_pilots cannot exceed coherence_samples")


@dataclass(frozen=True)
class Topology:
    ap_positions: np.ndarray
    ue_positions: np.ndarray
    antennas_per_ap: int = 1
    area_km: float = 1.0

    def __post_init__(self):
        ap = np.asarray(self.ap_positions, dtype=float).reshape(-1, 2)
        ue = np.asarray(self.ue_positions, dtype=float).reshape(-1, 2)
        if len(ap) == 0 or len(ue) == 0:
            raise InvalidDimensionError("topology needs at least one AP and one UE")
        if self.antennas_per_ap < 1:
            raise InvalidDimensionError("antennas_per_ap must be >= 1")
        for pts in (ap, ue):
            if np.any(pts < 0) or np.any(pts >= self.area_km):
                raise ValueError("positions must lie in [0, area_km)^2")
        object.__setattr__(self, "ap_positions", ap)
        object.__setattr__(self, "ue_positions", ue)

    @property
    def num_aps(self) -> int:
        return len(self.ap_positions)

    @property
    def num_ues(self) -> int:
        return len(self.ue_positions)


@dataclass(frozen=True)
class Scenario:
    radio: RadioParams
    topology: Topology
    seed: int = 0

    def with_radio(self, **changes) -> "Scenario":
        return replace(self, radio=replace(self.radio, **changes))


def generate_topology(M: int, K: int, L: int = 1, area_km: float = 1.0,
                      rng: np.random.Generator | None = None) -> Topology:
    """Drop ``M`` APs and ``K`` UEs i.i.d. uniformly in the square."""
    if M < 1 or K < 1:
        raise InvalidDimensionError(f"need M >= 1 and K >= 1, got M={M}, K={K}")
    if rng is None:
        rng = np.random.default_rng()
    ap = rng.uniform(0.0, area_km, size=(M, 2))
    ue = rng.uniform(0.0, area_km, size=(K, 2))
    return Topology(ap, ue, antennas_per_ap=L, area_km=area_km)


def wrap_distance(a, b, area_km: float = 1.0):
    """Toroidal distance between ``a`` and ``b`` (broadcasts over leading dims).

    Taking the per-axis minimum of |dx| and area-|dx| is the same as the
    minimum over the nine shifted copies of ``b``.
    """
    delta = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    delta = np.minimum(delta, area_km - delta)
    return np.sqrt(np.sum(delta * delta, axis=-1))


def pairwise_wrap_distance(x: np.ndarray, y: np.ndarray, area_km: float = 1.0) -> np.ndarray:
    """Matrix of toroidal distances, shape ``(len(x), len(y))``."""
    return wrap_distance(x[:, None, :], y[None, :, :], area_km)


# purposes for drop_rng; keyed separately so that adding a solver does not
# shift the channel draw seen by the others
PLACEMENT = 0
SHADOWING = 1
LOCATION_ERROR = 2
SOLVER = 3


def drop_rng(seed: int, drop: int, purpose: int, sub: int = 0) -> np.random.Generator:
    """Independent generator for one (drop, purpose, sub-stream) triple."""
    ss = np.random.SeedSequence(seed, spawn_key=(drop, purpose, sub))
    return np.random.default_rng(ss)
