import numpy as np
import pytest

from cfpilot.channel import (estimation_stats, hata_offset_db, large_scale, path_loss_db,
                             simulate_ul_decomposition)
from cfpilot.scenario import RadioParams, Scenario, generate_topology

R = RadioParams()


def test_hata_offset_value():
    # 46.3 + 33.9 log f - 13.82 log 15 - (1.1 log f - 0.7) 1.65 + (1.56 log f - 0.8), f = 1900
    assert hata_offset_db(R) == pytest.approx(140.7151, abs=1e-3)


def test_path_loss_continuity():
    d0, d1 = R.d0_m / 1000, R.d1_m / 1000
    eps = 1e-12
    assert path_loss_db(d0, R) == pytest.approx(path_loss_db(d0 + eps, R), abs=1e-8)
    assert path_loss_db(d1, R) == pytest.approx(path_loss_db(d1 + eps, R), abs=1e-8)


def test_path_loss_flat_and_decreasing():
    assert path_loss_db(0.0, R) == path_loss_db(0.005, R)
    d = np.linspace(0.011, 1.0, 500)
    assert np.all(np.diff(path_loss_db(d, R)) < 0)


def test_path_loss_slope_far():
    assert path_loss_db(0.1, R) - path_loss_db(1.0, R) == pytest.approx(35.0)


def _scenario(shadow, seed=0):
    radio = RadioParams(shadow_std_db=shadow)
    return Scenario(radio, generate_topology(20, 6, rng=np.random.default_rng(seed)), seed)


def test_no_shadowing_exact():
    ls = large_scale(_scenario(0.0), rng=np.random.default_rng(1))
    assert np.array_equal(ls.beta, 10.0 ** (ls.pl_db / 10.0))


def test_beta_positive_and_deterministic():
    scen = _scenario(8.0)
    a = large_scale(scen, rng=np.random.default_rng(5)).beta
    b = large_scale(scen, rng=np.random.default_rng(5)).beta
    assert np.all(a > 0) and np.array_equal(a, b)


def test_gamma_single_ue():
    beta = np.array([[0.3], [2.0]])
    t, rho = 4, 5.0
    g = estimation_stats(beta, np.array([0]), t, rho).gamma
    assert np.allclose(g, t * rho * beta ** 2 / (t * rho * beta + 1), rtol=1e-14)
    assert np.all(g < beta)


def test_gamma_perfect_limit():
    beta = np.random.default_rng(0).uniform(0.1, 1, (4, 3))
    g = estimation_stats(beta, np.arange(3), 3, 1e12).gamma
    assert np.allclose(g, beta, rtol=1e-9)


def test_gamma_two_copilot_equal_beta():
    beta = np.array([[0.7, 0.7]])
    t, rho = 2, 3.0
    g = estimation_stats(beta, np.array([0, 0]), t, rho).gamma
    assert np.allclose(g, t * rho * 0.49 / (2 * t * rho * 0.7 + 1), rtol=1e-14)


def test_estimation_shape_error():
    with pytest.raises(ValueError):
        estimation_stats(np.ones((2, 3)), np.array([0, 1]), 2, 1.0)


def test_decomposition_zero_power():
    rng = np.random.default_rng(0)
    beta = rng.uniform(0.2, 1.0, (3, 2))
    mc = simulate_ul_decomposition(beta, np.array([0, 0]), 0, L=1, tau_p=1, rho_p=2.0, rho_u=0.0,
                                   eta=np.ones(2), num_draws=2000, rng=rng)
    assert mc.ds_mean == 0 and mc.bu_var == 0 and mc.cpi_var == 0 and mc.noise_var > 0


def test_decomposition_signal_mean():
    rng = np.random.default_rng(4)
    beta = rng.uniform(0.2, 1.0, (3, 2))
    pilots = np.array([0, 0])
    rho_p, rho_u, eta = 2.0, 3.0, np.array([0.8, 1.0])
    for L in (1, 2):
        mc = simulate_ul_decomposition(beta, pilots, 0, L=L, tau_p=1, rho_p=rho_p, rho_u=rho_u, eta=eta,
                                       num_draws=20000, rng=rng)
        gamma = estimation_stats(beta, pilots, 1, rho_p).gamma
        expect = np.sqrt(rho_u * eta[0]) * L * gamma[:, 0].sum()
        assert abs(mc.ds_mean - expect) < 3 * mc.ds_mean_se


def test_decomposition_unique_pilots_cpi():
    # orthogonal pilots: the coherent co-pilot part vanishes, leaving the non-coherent
    # interference rho_u eta_k' L sum_m gamma_mk beta_mk'
    rng = np.random.default_rng(9)
    beta = rng.uniform(0.2, 1.0, (3, 2))
    pilots = np.array([0, 1])
    rho_p, rho_u, eta = 2.0, 3.0, np.array([1.0, 0.6])
    mc = simulate_ul_decomposition(beta, pilots, 0, L=1, tau_p=2, rho_p=rho_p, rho_u=rho_u, eta=eta,
                                   num_draws=40000, rng=rng)
    gamma = estimation_stats(beta, pilots, 2, rho_p).gamma
    expect = rho_u * eta[1] * np.sum(gamma[:, 0] * beta[:, 1])
    assert abs(mc.cpi_var - expect) < 3 * mc.cpi_var_se
