import numpy as np
import pytest

from risim.channel import build_geometry, build_lambda, draw_channels, transmit_frame
from risim.config import SystemConfig
from risim.estimator import (EstimatorState, ReflectionSchedule, align_phases,
                             coarse_cascade_estimate, design_reflection_schedule,
                             iterative_refine, lmmse_estimate, make_pilot_book,
                             make_pilot_partitions, rebuild_frame_symbols,
                             split_sum_diff)
from risim.link import cascade_covariance, frame_symbols
from risim.modem import PacketLayout


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


# -- partitions and sum/difference --

def test_partition_examples():
    p1, p2 = make_pilot_partitions(0, 4)
    assert list(p1) == [0, 1] and list(p2) == [2, 3]
    p1, p2 = make_pilot_partitions(0, 16)
    assert len(p1) == len(p2) == 8
    p1, p2 = make_pilot_partitions(5, 2)
    assert list(p1) == [5] and list(p2) == [6]
    with pytest.raises(ValueError):
        make_pilot_partitions(0, 3)


def test_partitions_disjoint_equal():
    p1, p2 = make_pilot_partitions(3, 10)
    assert not set(p1) & set(p2)
    assert len(p1) == len(p2)


def test_split_sum_diff_cancellation(los_channels, rng):
    cfg = SystemConfig()
    n_p = 16
    book = make_pilot_book(cfg.num_users, n_p)
    layout = PacketLayout(cfg.ldpc_block_len, n_p, 0)
    sched = design_reflection_schedule(cfg.n_total, layout)
    Y = transmit_frame(los_channels, sched.theta_pilot, book.symbols_full,
                       0.0, rng)
    y_sum, y_diff = split_sum_diff(Y[:, :n_p // 2], Y[:, n_p // 2:])
    direct = los_channels.H @ book.symbols_half
    cascade = los_channels.Z_all @ build_lambda(
        book.symbols_half, sched.theta_pilot[:, :n_p // 2])
    scale = np.linalg.norm(Y)
    assert np.linalg.norm(y_sum - direct) < 1e-12 * scale
    assert np.linalg.norm(y_diff - cascade) < 1e-12 * scale


def test_split_sum_diff_noise_variance(rng):
    sigma2 = 0.8
    n = 200_000
    Y1 = np.sqrt(sigma2) * crandn(rng, 1, n)
    Y2 = np.sqrt(sigma2) * crandn(rng, 1, n)
    s, d = split_sum_diff(Y1, Y2)
    assert np.mean(np.abs(s) ** 2) == pytest.approx(sigma2 / 2, rel=0.05)
    assert np.mean(np.abs(d) ** 2) == pytest.approx(sigma2 / 2, rel=0.05)


def test_split_shape_mismatch():
    with pytest.raises(ValueError):
        split_sum_diff(np.ones((2, 3)), np.ones((2, 4)))


# -- pilot book --

def test_pilot_book_repetition_and_orthogonality():
    book = make_pilot_book(4, 16)
    full = book.symbols_full
    assert np.array_equal(full[:, :8], full[:, 8:])
    gram = book.symbols_half @ book.symbols_half.conj().T
    assert np.allclose(gram, 8 * np.eye(4))
    assert np.allclose(np.abs(full), 1.0)


def test_pilot_book_bits_reproduce_symbols():
    from risim.modem import qpsk_map
    book = make_pilot_book(4, 16)
    sym = qpsk_map(book.bits)
    assert np.allclose(sym, book.symbols_full)


def test_pilot_book_rejects_bad_length():
    with pytest.raises(ValueError):
        make_pilot_book(4, 10)   # half = 5 not a multiple of the order 4


# -- LMMSE --

def test_lmmse_noise_free_orthogonal_exact(rng):
    M, K, T = 4, 3, 6
    H = crandn(rng, M, K)
    P = np.concatenate([np.eye(K), np.eye(K)], axis=1) * 2.0  # orthogonal rows
    Y = H @ P
    H_hat = lmmse_estimate(Y, P, np.ones(K), 0.0)
    assert np.linalg.norm(H_hat - H) < 1e-10 * np.linalg.norm(H)


def test_lmmse_scalar_shrinkage():
    Y = np.array([[3.0 + 0j]])
    est = lmmse_estimate(Y, np.array([[1.0 + 0j]]), np.array([1.0]), 1.0)
    assert est[0, 0] == pytest.approx(1.5)


def test_lmmse_beats_ls_at_low_snr(rng):
    M, K, T = 2, 2, 4
    noise = 1.0    # 0 dB with unit-power channels and pilots
    P = np.concatenate([np.eye(K), np.eye(K)], axis=1).astype(complex)
    se_lmmse = se_ls = 0.0
    for _ in range(2000):
        H = crandn(rng, M, K)
        Y = H @ P + np.sqrt(noise) * crandn(rng, M, T)
        H_mmse = lmmse_estimate(Y, P, np.ones(K), noise)
        H_ls = Y @ P.conj().T @ np.linalg.inv(P @ P.conj().T)
        se_lmmse += np.linalg.norm(H_mmse - H) ** 2
        se_ls += np.linalg.norm(H_ls - H) ** 2
    assert se_lmmse < se_ls


def test_lmmse_rejects_negative_noise():
    with pytest.raises(ValueError):
        lmmse_estimate(np.ones((1, 1)), np.ones((1, 1)), np.ones(1), -1.0)


def test_lmmse_error_power_tracks_truth(rng):
    M, K, T = 4, 3, 8
    noise = 0.5
    P = crandn(rng, K, T) * np.sqrt(2)
    emp = 0.0
    n_mc = 3000
    for _ in range(n_mc):
        H = crandn(rng, M, K)
        Y = H @ P + np.sqrt(noise) * crandn(rng, M, T)
        H_hat, err = lmmse_estimate(Y, P, np.ones(K), noise, return_error=True)
        emp += np.linalg.norm(H_hat - H) ** 2 / M
    assert emp / n_mc == pytest.approx(err, rel=0.05)


# -- coarse cascaded estimation --

def test_coarse_full_rank_exact_recovery(rng):
    cfg = SystemConfig()
    gains = build_geometry(cfg)
    ch = draw_channels(gains, cfg, rng)
    kn = cfg.num_users * cfg.n_total
    book = make_pilot_book(cfg.num_users, 2 * kn)
    from risim.estimator import _dft_pilot_phases
    phases = _dft_pilot_phases(cfg.n_total, kn)
    Lam = build_lambda(book.symbols_half, phases)
    Y = ch.Z_all @ Lam
    R = cascade_covariance(ch, cfg.elements_per_ris)
    Z_hat = coarse_cascade_estimate(Y, Lam, R, 0.0)
    rel = np.linalg.norm(Z_hat - ch.Z_all) / np.linalg.norm(ch.Z_all)
    assert rel < 1e-9


def test_coarse_underdetermined_equals_projection(rng):
    """Noise-free with T < KN and uniform covariance: the estimate is the
    projection of the truth onto the span of the measurement columns."""
    M, K, N = 3, 2, 4
    kn = K * N
    T = kn // 4
    Z = crandn(rng, M, kn)
    Lam = crandn(rng, kn, T)
    Y = Z @ Lam
    Z_hat = coarse_cascade_estimate(Y, Lam, np.ones(kn), 0.0)
    Q, _ = np.linalg.qr(Lam)
    Z_proj = Z @ Q @ Q.conj().T
    assert np.linalg.norm(Z_hat - Z_proj) < 1e-9 * np.linalg.norm(Z_proj)
    floor = np.linalg.norm(Z - Z_proj) ** 2 / np.linalg.norm(Z) ** 2
    nmse = np.linalg.norm(Z_hat - Z) ** 2 / np.linalg.norm(Z) ** 2
    assert nmse == pytest.approx(floor, rel=1e-6)
    assert nmse > 0.1


def test_coarse_zero_input_zero_output():
    Lam = np.ones((4, 2), dtype=complex)
    out = coarse_cascade_estimate(np.zeros((3, 2)), Lam, np.ones(4), 0.3)
    assert not out.any()


# -- reflection schedule --

def test_parity_segment_square_dft_unitary():
    layout = PacketLayout(64, 2, 0)       # parity syms = 16
    sched = design_reflection_schedule(16, layout)
    th = sched.theta_parity
    assert th.shape == (16, 16)
    assert np.allclose(th @ th.conj().T, 16 * np.eye(16), atol=1e-9)


def test_pilot_negation_and_modulus(los_config):
    layout = PacketLayout(512, 96, 0)
    sched = design_reflection_schedule(32, layout)
    th = sched.theta_pilot
    assert th.shape == (32, 96)
    assert np.allclose(th[:, 48:], -th[:, :48])
    assert np.allclose(np.abs(th), 1.0)


def test_pilot_phase_concatenation_count():
    # 32 elements, 96 pilots -> 48 distinct columns need two DFT copies
    layout = PacketLayout(512, 96, 0)
    sched = design_reflection_schedule(32, layout)
    half = sched.theta_pilot[:, :48]
    dft = np.exp(-2j * np.pi * np.outer(np.arange(32), np.arange(32)) / 32)
    # first block is the plain DFT
    assert np.allclose(half[:, :32], dft)
    # second block is the same DFT advanced by one column
    assert np.allclose(half[:, 32:48], dft[:, 1:17])


def test_info_segment_rank_one():
    layout = PacketLayout(512, 16, 0)
    phi = np.exp(1j * np.linspace(0, 3, 32))
    sched = design_reflection_schedule(32, layout, phi)
    assert np.linalg.matrix_rank(sched.theta_info) == 1
    assert np.allclose(sched.theta_info[:, 0], phi)


def test_schedule_rejects_nonunit_phi():
    layout = PacketLayout(512, 16, 0)
    with pytest.raises(ValueError):
        design_reflection_schedule(32, layout, 2.0 * np.ones(32, dtype=complex))


@pytest.mark.parametrize("n_pilot", [16, 96])
def test_pilot_lambda_equal_singular_values(n_pilot):
    cfg = SystemConfig()
    book = make_pilot_book(cfg.num_users, n_pilot)
    layout = PacketLayout(512, n_pilot, 0)
    sched = design_reflection_schedule(cfg.n_total, layout)
    Lam = build_lambda(book.symbols_half, sched.theta_pilot[:, :n_pilot // 2])
    s = np.linalg.svd(Lam, compute_uv=False)
    nonzero = s[s > 1e-9 * s[0]]
    assert nonzero.max() / nonzero.min() < 1.2
    assert len(nonzero) == n_pilot // 2


def test_full_matrix_covers_layout():
    layout = PacketLayout(512, 16, 4)
    sched = design_reflection_schedule(32, layout)
    full = sched.full_matrix()
    assert full.shape == (32, layout.frame_syms)
    assert np.allclose(np.abs(full), 1.0)


# -- phase alignment --

def test_align_phases_no_estimate_gives_ones():
    out = align_phases(np.zeros((4, 2)), np.zeros((4, 2 * 8)))
    assert np.array_equal(out, np.ones(8))


def test_align_phases_improves_combined_gain(rng):
    M, K, N = 4, 2, 8
    H = crandn(rng, M, K)
    Z = crandn(rng, M, K * N)
    phi = align_phases(H, Z)
    assert np.allclose(np.abs(phi), 1.0)
    Z3 = Z.reshape(M, K, N)
    k = int(np.argmax(np.sum(np.abs(Z3) ** 2, axis=(0, 2))))
    gain = np.linalg.norm(H[:, k] + Z3[:, k] @ phi)
    base = np.mean([np.linalg.norm(H[:, k] + Z3[:, k] @ np.exp(
        2j * np.pi * rng.uniform(size=N))) for _ in range(50)])
    assert gain > base


# -- iterative refinement --

def _genie_frame(cfg, code, channels, rng, noise_scale=1e-24):
    """Well-conditioned frame: independent random phases per symbol."""
    layout = PacketLayout(cfg.ldpc_block_len, cfg.pilot_len, 0)
    book = make_pilot_book(cfg.num_users, cfg.pilot_len)
    info = rng.integers(0, 2, (cfg.num_users, layout.num_info_bits)).astype(np.uint8)
    X = frame_symbols(layout, code, book, info)
    sched = design_reflection_schedule(cfg.n_total, layout)
    rnd = np.exp(2j * np.pi * rng.uniform(size=(cfg.n_total, layout.num_info_syms)))
    sched = ReflectionSchedule(theta_preamble=sched.theta_preamble,
                               theta_pilot=sched.theta_pilot,
                               theta_info=rnd,
                               theta_parity=sched.theta_parity,
                               layout=layout)
    noise_var = noise_scale * np.linalg.norm(channels.Z_all) ** 2
    Y = transmit_frame(channels, sched.full_matrix(), X, noise_var, rng)
    return layout, book, sched, Y, noise_var, info


def test_refine_genie_noise_free_exact(code512, rng):
    cfg = SystemConfig()
    gains = build_geometry(cfg)
    ch = draw_channels(gains, cfg, rng)
    layout, book, sched, Y, noise_var, _ = _genie_frame(cfg, code512, ch, rng)
    R_Z = cascade_covariance(ch, cfg.elements_per_ris)
    state = EstimatorState(H_hat=ch.H.copy(), Z_all_hat=np.zeros_like(ch.Z_all))
    iterative_refine(Y, sched, book, code512, state, R_Z, 1.0, noise_var,
                     max_iters=1, tol=0.0, idd_rounds=1)
    rel = np.linalg.norm(state.Z_all_hat - ch.Z_all) / np.linalg.norm(ch.Z_all)
    assert rel < 1e-6


def test_refine_zero_iters_no_change(code512, rng):
    cfg = SystemConfig()
    gains = build_geometry(cfg)
    ch = draw_channels(gains, cfg, rng)
    layout, book, sched, Y, noise_var, _ = _genie_frame(cfg, code512, ch, rng)
    R_Z = cascade_covariance(ch, cfg.elements_per_ris)
    z0 = np.ones_like(ch.Z_all)
    state = EstimatorState(H_hat=ch.H.copy(), Z_all_hat=z0.copy())
    out = iterative_refine(Y, sched, book, code512, state, R_Z, 1.0, noise_var,
                           max_iters=0, tol=0.0, idd_rounds=1)
    assert out is None
    assert np.array_equal(state.Z_all_hat, z0)
    assert state.refine_iter == 0


def test_refine_stops_on_tolerance(code512, rng):
    cfg = SystemConfig()
    gains = build_geometry(cfg)
    ch = draw_channels(gains, cfg, rng)
    layout, book, sched, Y, noise_var, _ = _genie_frame(cfg, code512, ch, rng)
    R_Z = cascade_covariance(ch, cfg.elements_per_ris)
    state = EstimatorState(H_hat=ch.H.copy(), Z_all_hat=np.zeros_like(ch.Z_all))
    iterative_refine(Y, sched, book, code512, state, R_Z, 1.0, noise_var,
                     max_iters=5, tol=1e-3, idd_rounds=1,
                     Z_truth=ch.Z_all)
    assert state.refine_iter < 5          # converged before the budget
    assert state.nmse_history[-1] < 1e-6


def test_rebuild_forces_pilot_bits(code512, toy_code, rng):
    from risim.detector import IddResult, SoftState
    cfg = SystemConfig()
    layout = PacketLayout(cfg.ldpc_block_len, 16, 0)
    book = make_pilot_book(cfg.num_users, 16)
    bad_bits = rng.integers(0, 2, (cfg.num_users, code512.n)).astype(np.uint8)
    state = SoftState(None, None, None, None, None, bad_bits,
                      np.zeros(cfg.num_users, dtype=bool))
    idd = IddResult(state=state, rounds_used=1)
    X = rebuild_frame_symbols(idd, layout, code512, book)
    from risim.modem import qpsk_map
    assert np.allclose(X[:, :16], qpsk_map(book.bits[:, :32]))
