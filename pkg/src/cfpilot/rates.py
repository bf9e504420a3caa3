"""Closed-form uplink/downlink rates, throughput accounting and power control."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import EstimationStats, copilot_mask
from .scenario import BOLTZMANN, RadioParams


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PowerControl:
    ul_eta: np.ndarray  # (K,)
    dl_eta: np.ndarray  # (M, K)


@dataclass(frozen=True)
class RateReport:
    ul_rate_bpshz: np.ndarray
    dl_rate_bpshz: np.ndarray
    ul_throughput_bps: np.ndarray
    dl_throughput_bps: np.ndarray


def noise_power_mw(radio: RadioParams) -> float:
    """Thermal noise power B*k_B*T0*W in mW, with W the linear noise figure."""
    watts = radio.bandwidth_hz * BOLTZMANN * radio.noise_temp_k * 10.0 ** (radio.noise_figure / 10.0)
    return watts * 1e3


def normalized_snrs(radio: RadioParams) -> tuple[float, float, float]:
    """(rho_p, rho_u, rho_d): transmit powers divided by the noise power."""
    pn = noise_power_mw(radio)
    return radio.pilot_power_mw / pn, radio.ul_power_mw / pn, radio.dl_power_mw / pn


def _check(beta, gamma, pilots):
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    pilots = np.asarray(pilots)
    if beta.shape != gamma.shape or beta.shape[1] != len(pilots):
        raise ValueError(f"dimension mismatch: beta {beta.shape}, gamma {gamma.shape}, {len(pilots)} pilots")
    return beta, gamma, pilots


def ul_sinr_terms(beta, gamma, pilots, L: int, rho_u: float, contamination: bool = True):
    """Signal gains and the linear interference structure of the uplink SINR.

    Returns ``(a, B, n)`` such that for power coefficients ``eta``
    ``SINR_k = a_k eta_k / (sum_j B_kj eta_j + n_k)``.
    """
    beta, gamma, pilots = _check(beta, gamma, pilots)
    sum_gamma = gamma.sum(axis=0)
    a = L * L * rho_u * sum_gamma ** 2
    # non-coherent interference, includes the own beamforming uncertainty
    B = L * rho_u * (gamma.T @ beta)
    if contamination:
        # coherent co-pilot part: (sum_m gamma_mk beta_mk' / beta_mk)^2
        coh = (gamma / beta).T @ beta
        mask = copilot_mask(pilots)
        np.fill_diagonal(mask, False)
        B = B + L * L * rho_u * np.where(mask, coh ** 2, 0.0)
    n = L * sum_gamma
    return a, B, n


def ul_sinr(beta, gamma, pilots, eta, L: int, rho_u: float, contamination: bool = True) -> np.ndarray:
    a, B, n = ul_sinr_terms(beta, gamma, pilots, L, rho_u, contamination)
    eta = np.asarray(eta, dtype=float)
    return a * eta / (B @ eta + n)


def ul_rate(beta, gamma, pilots, eta, L: int, rho_u: float, contamination: bool = True) -> np.ndarray:
    """Per-UE uplink rate in bit/s/Hz with MR combining at the CPU."""
    return np.log2(1.0 + ul_sinr(beta, gamma, pilots, eta, L, rho_u, contamination))


def dl_sinr(beta, gamma, pilots, eta, L: int, rho_d: float, contamination: bool = True) -> np.ndarray:
    beta, gamma, pilots = _check(beta, gamma, pilots)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != beta.shape:
        raise ValueError(f"dl eta must be {beta.shape}, got {eta.shape}")
    weighted = np.sqrt(eta) * gamma  # eta_mk^1/2 gamma_mk
    signal = L * L * rho_d * weighted.sum(axis=0) ** 2
    # sum_k' sum_m eta_mk' gamma_mk' beta_mk  -> per receiving UE k
    noncoh = L * rho_d * beta.T @ (eta * gamma).sum(axis=1)
    den = noncoh + 1.0
    if contamination:
        # (sum_m eta_mk'^1/2 gamma_mk' beta_mk / beta_mk')^2 for co-pilot k' != k
        coh = beta.T @ (weighted / beta)  # [k, k']
        mask = copilot_mask(pilots)
        np.fill_diagonal(mask, False)
        den = den + L * L * rho_d * np.where(mask, coh ** 2, 0.0).sum(axis=1)
    return signal / den


def dl_rate(beta, gamma, pilots, eta, L: int, rho_d: float, contamination: bool = True) -> np.ndarray:
    """Per-UE downlink rate in bit/s/Hz with conjugate beamforming."""
    return np.log2(1.0 + dl_sinr(beta, gamma, pilots, eta, L, rho_d, contamination))


def dl_power_alloc(gamma: np.ndarray) -> np.ndarray:
    """Equal-fraction allocation saturating every AP: eta_mk = 1 / sum_k' gamma_mk'."""
    gamma = np.asarray(gamma, dtype=float)
    per_ap = 1.0 / gamma.sum(axis=1)
    return np.repeat(per_ap[:, None], gamma.shape[1], axis=1)


def _feasible_eta(a, B, n, t):
    """Smallest power vector reaching SINR ``t`` for every UE, or None.

    At fixed ``t`` the SINR constraints are linear: (diag(a) - t B) eta = t n.
    A positive solution exists iff the target is reachable without the power
    cap; the cap is then checked separately.
    """
    A = np.diag(a) - t * B
    try:
        eta = np.linalg.solve(A, t * n)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(eta)) or np.any(eta <= 0):
        return None
    return eta


def maxmin_ul_power(beta, gamma, pilots, L: int, rho_u: float, contamination: bool = True,
                    rtol: float = 1e-10, max_iter: int = 64) -> np.ndarray:
    """Uplink power coefficients maximising the minimum SINR.

    Bisection on the common SINR target. At the optimum every UE has the same
    SINR and the largest coefficient is 1.
    """
    a, B, n = ul_sinr_terms(beta, gamma, pilots, L, rho_u, contamination)
    K = len(a)
    if K == 1:
        return np.ones(1)
    # no UE can beat its interference-free SINR at full power
    hi = float(np.min(a / (np.diag(B) + n)))
    lo = 0.0
    best = None
    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            break
        t = 0.5 * (lo + hi)
        eta = _feasible_eta(a, B, n, t)
        if eta is not None and eta.max() <= 1.0:
            lo, best = t, eta
        else:
            hi = t
    else:
        if hi - lo > rtol * hi:
            raise ConvergenceError(f"bisection did not converge in {max_iter} iterations")
    if best is None:
        raise ConvergenceError("no feasible SINR target found")
    return best / best.max()


def throughput(rate_bpshz, radio: RadioParams):
    """Per-user throughput in bit/s, net of pilot overhead and UL/DL time sharing."""
    if radio.num_pilots > radio.coherence_samples:
        raise ValueError("num_pilots cannot exceed coherence_samples")
    factor = radio.bandwidth_hz * (1.0 - radio.num_pilots / radio.coherence_samples) / 2.0
    return factor * np.asarray(rate_bpshz, dtype=float)
