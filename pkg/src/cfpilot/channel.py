"""Large-scale fading, path loss and MMSE channel-estimation statistics.

Pilots are never materialised: with an orthonormal pilot book the only thing
that matters is whether two UEs share a pilot index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import RadioParams, Scenario, pairwise_wrap_distance


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class LargeScale:
    beta: np.ndarray  # (M, K) linear
    pl_db: np.ndarray
    shadow_db: np.ndarray

    @property
    def beta_db(self) -> np.ndarray:
        return self.pl_db + self.shadow_db


@dataclass(frozen=True)
class EstimationStats:
    c: np.ndarray  # (M, K)
    gamma: np.ndarray  # (M, K)


def hata_offset_db(radio: RadioParams) -> float:
    """The frequency/height dependent constant of the three-slope model."""
    lf = np.log10(radio.carrier_freq_mhz)
    return (46.3 + 33.9 * lf - 13.82 * np.log10(radio.ap_height_m)
            - (1.1 * lf - 0.7) * radio.ue_height_m + (1.56 * lf - 0.8))


def path_loss_db(d_km, radio: RadioParams):
    """Three-slope path loss (as a gain in dB, i.e. negative) at distance ``d_km``.

    Distances below ``d0`` fall in the flat first branch, so ``d = 0`` is fine.
    """
    d = np.asarray(d_km, dtype=float)
    d0 = radio.d0_m / 1000.0
    d1 = radio.d1_m / 1000.0
    offset = hata_offset_db(radio)
    near = -offset - 15 * np.log10(d1) - 20 * np.log10(d0)
    with np.errstate(divide="ignore"):
        logd = np.log10(np.maximum(d, d0))
    mid = -offset - 15 * np.log10(d1) - 20 * logd
    far = -offset - 35 * logd
    out = np.where(d <= d0, near, np.where(d <= d1, mid, far))
    return out if out.ndim else float(out)


def large_scale(scenario: Scenario, rng: np.random.Generator | None = None) -> LargeScale:
    """Path loss plus i.i.d. log-normal shadowing for every (AP, UE) pair."""
    topo = scenario.topology
    radio = scenario.radio
    dist = pairwise_wrap_distance(topo.ap_positions, topo.ue_positions, topo.area_km)
    pl = path_loss_db(dist, radio)
    if rng is None:
        rng = np.random.default_rng(scenario.seed)
    z = rng.standard_normal(pl.shape)
    shadow = radio.shadow_std_db * z
    beta = 10.0 ** ((pl + shadow) / 10.0)
    return LargeScale(beta=beta, pl_db=pl, shadow_db=shadow)


def copilot_mask(pilots: np.ndarray) -> np.ndarray:
    """Boolean (K, K) matrix, True where two UEs share a pilot (diagonal included)."""
    pilots = np.asarray(pilots)
    return pilots[:, None] == pilots[None, :]


def estimation_stats(beta: np.ndarray, pilots: np.ndarray, tau_p: int, rho_p: float) -> EstimationStats:
    """MMSE estimation coefficients ``c`` and mean-square estimate ``gamma``.

    ``rho_p`` is the pilot SNR normalised to the noise power.
    """
    beta = np.asarray(beta, dtype=float)
    pilots = np.asarray(pilots)
    if beta.shape[1] != len(pilots):
        raise ValueError("beta has %d UE columns but %d pilots given" % (beta.shape[1], len(pilots)))
    # per-AP received pilot power summed over each pilot group
    n_groups = int(pilots.max()) + 1
    onehot = np.zeros((len(pilots), n_groups))
    onehot[np.arange(len(pilots)), pilots] = 1.0
    group_sum = beta @ onehot  # (M, groups)
    contaminated = group_sum[:, pilots]
    snr = tau_p * rho_p
    c = np.sqrt(snr) * beta / (snr * contaminated + 1.0)
    gamma = np.sqrt(snr) * beta * c
    return EstimationStats(c=c, gamma=gamma)


@dataclass(frozen=True)
class DecompositionStats:
    """Empirical moments of the uplink MR-combined signal terms for one UE."""
    ds_mean: float
    ds_mean_se: float
    bu_var: float
    bu_var_se: float
    cpi_var: float
    cpi_var_se: float
    noise_var: float
    noise_var_se: float
    sinr: float
    sinr_se: float
    draws: int


def _moment_se(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / np.sqrt(len(x)))


def simulate_ul_decomposition(beta: np.ndarray, pilots: np.ndarray, ue: int, *, L: int,
                              tau_p: int, rho_p: float, rho_u: float, eta: np.ndarray,
                              num_draws: int, rng: np.random.Generator,
                              budget: float = 5e7, batches: int = 50) -> DecompositionStats:
    """Monte-Carlo estimate of the DS / BU / CPI / noise terms for UE ``ue``.

    Small-scale fading, pilot observations and MMSE estimates are drawn
    explicitly, the data signal is MR-combined across APs and antennas and the
    use-and-then-forget SINR is formed from the empirical moments. Validation
    only; the simulator never needs this.
    """
    beta = np.asarray(beta, dtype=float)
    pilots = np.asarray(pilots)
    eta = np.asarray(eta, dtype=float)
    M, K = beta.shape
    if M * K * L * num_draws > budget:
        raise InstanceTooLargeError(f"M*K*L*draws = {M * K * L * num_draws:.3g} exceeds budget {budget:.3g}")
    stats = estimation_stats(beta, pilots, tau_p, rho_p)
    c = stats.c[:, ue]

    def cn(shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)

    g = np.sqrt(beta)[None, :, :, None] * cn((num_draws, M, K, L))
    # projected pilot observation at every AP for UE ue's pilot
    same = pilots == pilots[ue]
    y_pilot = np.sqrt(tau_p * rho_p) * g[:, :, same, :].sum(axis=2) + cn((num_draws, M, L))
    g_hat = c[None, :, None] * y_pilot  # (draws, M, L)

    # inner products sum_m sum_l conj(ghat_mk) g_mk'
    gains = np.einsum("dml,dmkl->dk", g_hat.conj(), g)
    noise = np.einsum("dml,dml->d", g_hat.conj(), cn((num_draws, M, L)))

    own = gains[:, ue]
    ds_mean = own.mean()
    ds = np.sqrt(rho_u * eta[ue]) * own
    bu = ds - np.sqrt(rho_u * eta[ue]) * ds_mean
    others = [k for k in range(K) if k != ue]
    # data symbols are independent with unit power, so each interferer adds
    # its own second moment
    cpi_pow = (rho_u * eta[others][None, :] * np.abs(gains[:, others]) ** 2).sum(axis=1)
    bu_pow = np.abs(bu) ** 2
    noise_pow = np.abs(noise) ** 2

    signal = rho_u * eta[ue] * np.abs(ds_mean) ** 2

    # batch means give a standard error for the ratio estimate
    idx = np.array_split(np.arange(num_draws), batches)
    batch_sinr = []
    for b in idx:
        mb = gains[b, ue].mean()
        bub = np.sqrt(rho_u * eta[ue]) * (gains[b, ue] - mb)
        den = np.mean(np.abs(bub) ** 2) + cpi_pow[b].mean() + noise_pow[b].mean()
        batch_sinr.append(rho_u * eta[ue] * np.abs(mb) ** 2 / den)
    batch_sinr = np.array(batch_sinr)

    sinr = signal / (bu_pow.mean() + cpi_pow.mean() + noise_pow.mean())
    return DecompositionStats(
        ds_mean=float(np.sqrt(rho_u * eta[ue]) * ds_mean.real),
        ds_mean_se=_moment_se(ds.real),
        bu_var=float(bu_pow.mean()),
        bu_var_se=_moment_se(bu_pow),
        cpi_var=float(cpi_pow.mean()),
        cpi_var_se=_moment_se(cpi_pow),
        noise_var=float(noise_pow.mean()),
        noise_var_se=_moment_se(noise_pow),
        sinr=float(sinr),
        sinr_se=float(np.std(batch_sinr, ddof=1) / np.sqrt(len(batch_sinr))),
        draws=num_draws,
    )


def dump_channels_csv(path, ls: LargeScale, stats: EstimationStats | None = None) -> None:
    """Write beta (and gamma) as CSV, one row per AP and one column per UE."""
    from pathlib import Path

    path = Path(path)
    np.savetxt(path.with_name(path.stem + "_beta.csv"), ls.beta, delimiter=",")
    if stats is not None:
        np.savetxt(path.with_name(path.stem + "_gamma.csv"), stats.gamma, delimiter=",")
