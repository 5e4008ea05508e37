import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from risim.channel import (GaussMarkovParams, assemble_effective, build_geometry,
                           build_lambda, draw_channels, evolve_channel,
                           pathloss_db, transmit, transmit_frame)
from risim.config import SystemConfig


def test_pathloss_at_one_meter():
    # log term vanishes: the intercept alone
    assert pathloss_db(1.0, (32.4, 30.0)) == pytest.approx(32.4, abs=1e-12)


def test_pathloss_direct_500m():
    val = pathloss_db(500.0, (32.4, 30.0))
    assert val == pytest.approx(32.4 + 30.0 * np.log10(500.0), abs=1e-9)
    assert val == pytest.approx(113.37, abs=0.01)


def test_pathloss_ap_to_ris():
    d = np.sqrt(500.0 ** 2 + 10.0 ** 2)
    assert d == pytest.approx(np.sqrt(250100.0), abs=1e-9)
    assert pathloss_db(d, (37.3, 22.0)) == pytest.approx(96.68, abs=0.01)


def test_zero_distance_rejected():
    with pytest.raises(ValueError):
        pathloss_db(0.0, (32.4, 30.0))
    cfg = SystemConfig(user_center=(0.0, 0.0, 0.0), user_radius=0.0)
    with pytest.raises(ValueError):
        build_geometry(cfg)


@given(st.floats(min_value=1.0, max_value=1e4), st.floats(min_value=1.0, max_value=1e4))
def test_gain_monotonic_in_distance(d1, d2):
    for law in ((32.4, 30.0), (37.3, 22.0)):
        g1 = 10 ** (-pathloss_db(d1, law) / 20)
        g2 = 10 ** (-pathloss_db(d2, law) / 20)
        if d1 < d2:
            assert g1 > g2
        elif d1 > d2:
            assert g1 < g2


def test_geometry_shapes_and_nlos():
    cfg = SystemConfig()
    g = build_geometry(cfg)
    assert g.gain_direct.shape == (cfg.num_users,)
    assert g.gain_ap_ris.shape == (cfg.num_ris,)
    assert g.gain_ris_user.shape == (cfg.num_ris, cfg.num_users)
    assert (g.gain_direct > 0).all()
    nlos = build_geometry(cfg.replace(scenario="NLOS", pilot_len=96))
    assert (nlos.gain_direct == 0).all()


def test_geometry_user_disc():
    cfg = SystemConfig()
    g = build_geometry(cfg)
    center = np.asarray(cfg.user_center)
    d = np.linalg.norm(g.user_positions - center, axis=1)
    assert (d <= cfg.user_radius + 1e-9).all()


def test_nlos_draw_zeroes_direct(nlos_config, rng):
    g = build_geometry(nlos_config)
    ch = draw_channels(g, nlos_config, rng)
    assert not ch.H.any()


def test_draw_variance_matches_gain(rng):
    cfg = SystemConfig()
    g = build_geometry(cfg)
    target = g.gain_ap_ris[0] ** 2
    samples = np.concatenate([
        draw_channels(g, cfg, rng).G_list[0].ravel() for _ in range(800)])
    assert samples.size >= 100_000
    var = np.mean(np.abs(samples) ** 2)
    assert var == pytest.approx(target, rel=0.03)


def test_draw_magnitude_is_rayleigh(rng):
    cfg = SystemConfig()
    g = build_geometry(cfg)
    mags = np.concatenate([
        draw_channels(g, cfg, rng).G_list[0].ravel() for _ in range(100)])
    sigma = g.gain_ap_ris[0] / np.sqrt(2.0)
    stat = stats.kstest(np.abs(mags), "rayleigh", args=(0, sigma))
    assert stat.pvalue > 0.01


def test_evolve_rho_one_is_identity(los_channels, rng):
    out = evolve_channel(los_channels, GaussMarkovParams(rho=1.0), rng)
    assert np.array_equal(out.H, los_channels.H)
    assert np.array_equal(out.Z_all, los_channels.Z_all)
    assert out.block_index == los_channels.block_index + 1


def test_evolve_rho_zero_is_memoryless(rng):
    cfg = SystemConfig()
    g = build_geometry(cfg)
    ch = draw_channels(g, cfg, rng)
    prev, new = [], []
    cur = ch
    for _ in range(1000):
        nxt = evolve_channel(cur, GaussMarkovParams(rho=0.0), rng)
        prev.append(cur.H.ravel())
        new.append(nxt.H.ravel())
        cur = nxt
    prev = np.concatenate(prev)
    new = np.concatenate(new)
    corr = np.abs(np.vdot(prev, new)) / (np.linalg.norm(prev) * np.linalg.norm(new))
    assert corr < 0.02


def test_evolve_correlation_matches_rho(rng):
    cfg = SystemConfig()
    g = build_geometry(cfg)
    ch = draw_channels(g, cfg, rng)
    rho = 0.9990
    gm = GaussMarkovParams(rho=rho)
    prev, new = [], []
    cur = ch
    for _ in range(10_000):
        nxt = evolve_channel(cur, gm, rng)
        prev.append(cur.G_list[0].ravel())
        new.append(nxt.G_list[0].ravel())
        cur = nxt
    prev = np.concatenate(prev)
    new = np.concatenate(new)
    corr = np.real(np.vdot(prev, new)) / (np.linalg.norm(prev) * np.linalg.norm(new))
    assert corr == pytest.approx(rho, abs=0.005)


def test_evolve_invalid_rho():
    with pytest.raises(ValueError):
        GaussMarkovParams(rho=1.2)


def test_stationary_power(rng):
    # ensemble of chains: the expected Frobenius power must not drift
    cfg = SystemConfig()
    g = build_geometry(cfg)
    gm = GaussMarkovParams(rho=0.9)
    fresh, evolved = [], []
    for _ in range(200):
        ch = draw_channels(g, cfg, rng)
        fresh.append(np.linalg.norm(ch.H) ** 2)
        for _ in range(100):
            ch = evolve_channel(ch, gm, rng)
        evolved.append(np.linalg.norm(ch.H) ** 2)
    assert np.mean(evolved) == pytest.approx(np.mean(fresh), rel=0.05)


def test_assemble_identity_phase(los_channels):
    cfg = SystemConfig()
    phi = np.ones(cfg.n_total)
    zero_direct = type(los_channels)(
        H=np.zeros_like(los_channels.H), G_list=los_channels.G_list,
        F_list=los_channels.F_list, gains=los_channels.gains)
    out = assemble_effective(zero_direct, phi)
    assert np.allclose(out, los_channels.G_p @ los_channels.F_p)


def test_assemble_grouped_vs_per_ris(los_channels, rng):
    phi = np.exp(2j * np.pi * rng.uniform(size=los_channels.G_p.shape[1]))
    grouped = assemble_effective(los_channels, phi)
    n = los_channels.G_list[0].shape[1]
    per_ris = los_channels.H.copy()
    for j, (G, F) in enumerate(zip(los_channels.G_list, los_channels.F_list)):
        per_ris = per_ris + G @ np.diag(phi[j * n:(j + 1) * n]) @ F
    rel = np.linalg.norm(grouped - per_ris) / np.linalg.norm(per_ris)
    assert rel < 1e-12


def test_assemble_matches_cascade_columns(los_channels, rng):
    phi = np.exp(2j * np.pi * rng.uniform(size=los_channels.G_p.shape[1]))
    H_bar = assemble_effective(los_channels, phi)
    M, K = los_channels.H.shape
    Z3 = los_channels.Z_all.reshape(M, K, -1)
    for k in range(K):
        col = los_channels.H[:, k] + Z3[:, k, :] @ phi
        assert np.linalg.norm(H_bar[:, k] - col) < 1e-12 * np.linalg.norm(col)


def test_assemble_dimension_error(los_channels):
    with pytest.raises(ValueError):
        assemble_effective(los_channels, np.ones(3))


def test_transmit_noise_free_probe(los_channels, rng):
    cfg = SystemConfig()
    phi = np.exp(2j * np.pi * rng.uniform(size=cfg.n_total))
    H_bar = assemble_effective(los_channels, phi)
    for k in range(cfg.num_users):
        e_k = np.zeros(cfg.num_users)
        e_k[k] = 1.0
        y = transmit(los_channels, phi, e_k, 0.0, rng)
        assert np.allclose(y, H_bar[:, k])


def test_transmit_noise_power(rng):
    cfg = SystemConfig()
    g = build_geometry(cfg)
    ch = draw_channels(g, cfg, rng)
    phi = np.ones(cfg.n_total)
    x = np.zeros(cfg.num_users)
    noise_var = 2.5
    samples = np.concatenate([
        transmit(ch, phi, x, noise_var, rng) for _ in range(20_000)])
    assert np.mean(np.abs(samples) ** 2) == pytest.approx(noise_var, rel=0.03)


def test_transmit_power_budget(rng):
    cfg = SystemConfig()
    g = build_geometry(cfg)
    ch = draw_channels(g, cfg, rng)
    phi = np.exp(2j * np.pi * rng.uniform(size=cfg.n_total))
    H_bar = assemble_effective(ch, phi)
    noise_var = 1e-12
    total = 0.0
    n_trials = 20_000
    for _ in range(n_trials):
        x = (rng.standard_normal(cfg.num_users)
             + 1j * rng.standard_normal(cfg.num_users)) / np.sqrt(2)
        total += np.linalg.norm(transmit(ch, phi, x, noise_var, rng)) ** 2
    expected = np.linalg.norm(H_bar) ** 2 + cfg.num_ap_antennas * noise_var
    assert total / n_trials == pytest.approx(expected, rel=0.03)


def test_transmit_frame_matches_per_symbol(los_channels, rng):
    cfg = SystemConfig()
    T = 5
    Phi = np.exp(2j * np.pi * rng.uniform(size=(cfg.n_total, T)))
    X = (rng.standard_normal((cfg.num_users, T))
         + 1j * rng.standard_normal((cfg.num_users, T)))
    Y = transmit_frame(los_channels, Phi, X, 0.0, rng)
    for t in range(T):
        y_t = transmit(los_channels, Phi[:, t], X[:, t], 0.0, rng)
        assert np.allclose(Y[:, t], y_t)


def test_build_lambda_scalar_user():
    phi = np.exp(1j * np.array([[0.3], [1.1]]))
    lam = build_lambda(np.array([[1.0 + 0j]]), phi)
    assert np.allclose(lam, phi)


def test_build_lambda_hand_example():
    x = np.array([[1.0], [-1.0]], dtype=complex)
    phi = np.array([[1.0], [1j]], dtype=complex)
    lam = build_lambda(x, phi)
    assert np.allclose(lam[:, 0], [1, 1j, -1, -1j])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 6), st.integers(1, 8), st.integers(0, 2 ** 31 - 1))
def test_lambda_synthesis_consistency(K, N, T, seed):
    r = np.random.default_rng(seed)
    Z = r.standard_normal((3, K * N)) + 1j * r.standard_normal((3, K * N))
    X = r.standard_normal((K, T)) + 1j * r.standard_normal((K, T))
    Phi = np.exp(2j * np.pi * r.uniform(size=(N, T)))
    lam = build_lambda(X, Phi)
    direct = np.zeros((3, T), dtype=complex)
    for t in range(T):
        for k in range(K):
            direct[:, t] += Z[:, k * N:(k + 1) * N] @ (Phi[:, t] * X[k, t])
    assert np.allclose(Z @ lam, direct, atol=1e-10)


def test_lambda_shape_mismatch():
    with pytest.raises(ValueError):
        build_lambda(np.ones((2, 3), dtype=complex), np.ones((4, 2), dtype=complex))
