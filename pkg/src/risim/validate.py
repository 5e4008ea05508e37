"""Fast self-checks of the core model identities, runnable from the CLI."""

from __future__ import annotations

import numpy as np

from .channel import (GaussMarkovParams, build_geometry, build_lambda,
                      draw_channels, evolve_channel, transmit_frame)
from .config import SystemConfig
from .estimator import (design_reflection_schedule, make_pilot_book,
                        make_pilot_partitions, split_sum_diff)
from .harness import rows_to_csv, run_monte_carlo, scheme_policy, spectral_efficiency
from .ldpc import build_ldpc, encode, has_four_cycle, spa_decode
from .link import COARSE
from .modem import PacketLayout, hard_bits_to_llrs, qpsk_map
from .tracker import TrackingPolicy, nmse_last


def run_all(config: SystemConfig | None = None):
    """Run every check; returns a list of (name, passed, detail)."""
    config = config or SystemConfig()
    results = []
    for name, fn in CHECKS:
        try:
            fn(config)
            results.append((name, True, ""))
        except AssertionError as exc:
            results.append((name, False, str(exc)))
        except Exception as exc:  # surface structural failures, keep going
            results.append((name, False, f"{type(exc).__name__}: {exc}"))
    return results


def _check_cascade_identity(config):
    rng = np.random.default_rng(0)
    gains = build_geometry(config, rng)
    ch = draw_channels(gains, config, rng)
    phi = np.exp(2j * np.pi * rng.uniform(size=config.n_total))
    x = (rng.standard_normal(config.num_users)
         + 1j * rng.standard_normal(config.num_users))
    lhs = ch.Z_all @ build_lambda(x[:, None], phi[:, None])[:, 0]
    rhs = (ch.G_p * phi[None, :]) @ ch.F_p @ x
    rel = np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)
    assert rel < 1e-12, f"cascade reconstruction error {rel:.2e}"


def _check_partition_cancellation(config):
    rng = np.random.default_rng(1)
    gains = build_geometry(config, rng)
    ch = draw_channels(gains, config, rng)
    n_p = config.pilot_len
    book = make_pilot_book(config.num_users, n_p)
    layout = PacketLayout(config.ldpc_block_len, n_p, 0)
    sched = design_reflection_schedule(config.n_total, layout)
    X = book.symbols_full
    Y = transmit_frame(ch, sched.theta_pilot, X, 0.0, rng)
    y_sum, y_diff = split_sum_diff(Y[:, :n_p // 2], Y[:, n_p // 2:])
    direct = ch.H @ book.symbols_half
    casc = ch.Z_all @ build_lambda(book.symbols_half, sched.theta_pilot[:, :n_p // 2])
    scale = np.linalg.norm(Y)
    assert np.linalg.norm(y_sum - direct) / scale < 1e-12, "direct isolation failed"
    assert np.linalg.norm(y_diff - casc) / scale < 1e-12, "cascade isolation failed"


def _check_gauss_markov_power(config):
    rng = np.random.default_rng(2)
    gains = build_geometry(config, rng)
    ch = draw_channels(gains, config, rng)
    gm = GaussMarkovParams(rho=0.95)
    p0 = np.linalg.norm(ch.Z_all) ** 2
    powers = []
    for _ in range(100):
        ch = evolve_channel(ch, gm, rng)
        powers.append(np.linalg.norm(ch.Z_all) ** 2)
    drift = abs(np.mean(powers) / p0 - 1.0)
    assert drift < 0.5, f"stationary power drifted by {drift:.2f}"


def _check_schedule_structure(config):
    layout = PacketLayout(config.ldpc_block_len, config.pilot_len, 0)
    sched = design_reflection_schedule(config.n_total, layout)
    n_p = config.pilot_len
    assert np.allclose(sched.theta_pilot[:, n_p // 2:], -sched.theta_pilot[:, :n_p // 2]), \
        "pilot phase negation broken"
    assert np.allclose(np.abs(sched.full_matrix()), 1.0), "non unit-modulus phases"
    assert np.linalg.matrix_rank(sched.theta_info) == 1, "info segment not rank one"


def _check_pilot_orthogonality(config):
    n_p = config.pilot_len
    book = make_pilot_book(config.num_users, n_p)
    gram = book.symbols_half @ book.symbols_half.conj().T
    target = np.eye(config.num_users) * (n_p // 2)
    assert np.allclose(gram, target, atol=1e-9), "pilot rows not orthogonal"


def _check_partitions(config):
    p1, p2 = make_pilot_partitions(0, 4)
    assert list(p1) == [0, 1] and list(p2) == [2, 3], "partition indices wrong"


def _check_nmse_last(config):
    assert abs(nmse_last(0.9990, 0.0) - 0.0020) < 1e-12, "reuse prediction wrong"


def _check_spectral_efficiency(config):
    layout = PacketLayout(512, 0, 0)
    policy = TrackingPolicy("NLOS", 96, 16, 16, 20, 0.999, 0.0)
    se = spectral_efficiency(layout, policy, 20)
    expected = 1.0 * (256 - (96 + 19 * 16) / 20) / 256
    assert abs(se - expected) < 1e-12, "tracked SE mismatch"
    zero = spectral_efficiency(layout, TrackingPolicy("NLOS", 2, 2, 1, 1, 1.0, 0.0), 1)
    assert zero < 1.0, "pilot overhead not charged"


def _check_ldpc_roundtrip(config):
    code = build_ldpc(48, 0.5, seed=3)
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, size=code.k).astype(np.uint8)
    cw = encode(bits, code)
    assert not code.syndrome(cw).any(), "syndrome nonzero"
    llr = hard_bits_to_llrs(cw)
    _, hard, ok = spa_decode(llr, code, 10)
    assert ok and np.array_equal(hard, cw), "noiseless decode failed"
    assert not has_four_cycle(code.H), "toy code has a 4-cycle"


def _check_qpsk(config):
    bits = np.array([0, 0, 1, 1, 0, 1, 1, 0], dtype=np.uint8)
    sym = qpsk_map(bits)
    assert np.allclose(np.abs(sym), 1.0), "non unit-energy symbols"
    assert np.allclose(sym[0], (1 + 1j) / np.sqrt(2)), "Gray anchor wrong"


def _check_determinism(config):
    small = config.replace(mc_frames=2, snr_grid=(10.0,),
                           max_refine_iters=1, max_idd_iters=1)
    a = rows_to_csv(run_monte_carlo(small, schemes=(COARSE,), frames=2))
    b = rows_to_csv(run_monte_carlo(small, schemes=(COARSE,), frames=2))
    assert a == b, "repeated run not byte-identical"


CHECKS = (
    ("cascade_identity", _check_cascade_identity),
    ("partition_cancellation", _check_partition_cancellation),
    ("gauss_markov_power", _check_gauss_markov_power),
    ("schedule_structure", _check_schedule_structure),
    ("pilot_orthogonality", _check_pilot_orthogonality),
    ("pilot_partitions", _check_partitions),
    ("nmse_last_formula", _check_nmse_last),
    ("spectral_efficiency", _check_spectral_efficiency),
    ("ldpc_roundtrip", _check_ldpc_roundtrip),
    ("qpsk_mapping", _check_qpsk),
    ("run_determinism", _check_determinism),
)
