"""Per-frame link simulation: transmit one coded multiuser frame under a
scheme-specific pilot arrangement, run the receiver, and score it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, build_lambda, transmit_frame
from .config import NLOS, SystemConfig
from .detector import run_idd
from .estimator import (EstimatorState, align_phases, coarse_cascade_estimate,
                        design_reflection_schedule, iterative_refine,
                        lmmse_estimate, make_pilot_book, split_sum_diff)
from .ldpc import CodeSpec, encode
from .modem import PacketLayout, qpsk_map

BENCHMARK = "benchmark"
COARSE = "coarse"
PROPOSED = "proposed"
TRACKED = "tracked"
SCHEMES = (BENCHMARK, COARSE, PROPOSED, TRACKED)

FIRST_STAGE = "first"
SECOND_STAGE = "second"


@dataclass
class FrameOutcome:
    nmse_direct: float
    nmse_cascade: float
    ber: float
    fer: float
    idd_rounds_used: int
    refine_iters_used: int
    pilot_symbols_spent: int
    state: EstimatorState
    nmse_refine_history: list = field(default_factory=list)
    ber_per_round: list = field(default_factory=list)


def benchmark_preamble_len(config: SystemConfig) -> int:
    """Full-rank pilot budget: enough paired pilots that the differenced
    block alone identifies every cascaded coefficient."""
    kn = config.num_users * config.n_total
    return 2 * kn * (2 if config.scenario != NLOS else 1)


def scheme_layout(scheme: str, stage: str, config: SystemConfig) -> PacketLayout:
    n = config.ldpc_block_len
    if scheme == BENCHMARK:
        return PacketLayout(n, 0, benchmark_preamble_len(config))
    if scheme in (COARSE, PROPOSED) or stage == FIRST_STAGE:
        return PacketLayout(n, config.pilot_len, 0)
    if config.scenario == NLOS:
        return PacketLayout(n, config.pilot_len_steady_nlos, 0)
    return PacketLayout(n, 0, config.pilot_len_steady_los)


def direct_covariance(channels: ChannelSet) -> np.ndarray:
    return channels.gains.gain_direct ** 2


def cascade_covariance(channels: ChannelSet, elements_per_ris: int) -> np.ndarray:
    return channels.gains.cascade_cov_diag(elements_per_ris)


def frame_symbols(layout: PacketLayout, code: CodeSpec, pilot_book,
                  info_bits: np.ndarray, preamble_book=None) -> np.ndarray:
    """Unit-energy symbols for the whole frame (all users)."""
    sys_bits = layout.assemble_systematic(pilot_book.bits, info_bits)
    X = qpsk_map(encode(sys_bits, code))
    if layout.num_preamble_syms:
        X = np.concatenate([preamble_book.symbols_full, X], axis=1)
    return X


def simulate_scheme_frame(scheme: str, stage: str, config: SystemConfig,
                          code: CodeSpec, channels: ChannelSet,
                          sym_energy: float, rng,
                          prev_state: EstimatorState | None = None,
                          refine_iters: int | None = None) -> FrameOutcome:
    """Transmit and receive one frame.

    The head of the frame (preamble plus embedded pilot region) is sent
    first; its phases never depend on the alignment vector, so the receiver
    can form its initial estimates and choose the information-segment phases
    before the remainder is transmitted.
    """
    K = config.num_users
    noise_var = config.noise_power
    layout = scheme_layout(scheme, stage, config)
    pilot_book = make_pilot_book(K, layout.num_pilot_syms)
    preamble_book = (make_pilot_book(K, layout.num_preamble_syms)
                     if layout.num_preamble_syms else None)

    info_bits = rng.integers(0, 2, size=(K, layout.num_info_bits)).astype(np.uint8)
    X = frame_symbols(layout, code, pilot_book, info_bits, preamble_book)

    schedule = design_reflection_schedule(config.n_total, layout)
    Phi_head_full = schedule.full_matrix()
    head = layout.num_preamble_syms + layout.num_pilot_syms
    root_es = np.sqrt(sym_energy)
    Y_head = transmit_frame(channels, Phi_head_full[:, :head],
                            root_es * X[:, :head], noise_var, rng)

    # --- receiver: initial estimates from the head ---
    R_H = direct_covariance(channels)
    R_Z = cascade_covariance(channels, config.elements_per_ris)
    H_hat = np.zeros_like(channels.H)
    Z_hat = np.zeros_like(channels.Z_all)
    err_h = float(np.sum(R_H)) if config.scenario != NLOS else 0.0
    err_z = float(np.sum(R_Z))

    if layout.num_preamble_syms:
        half = layout.num_preamble_syms // 2
        Y1, Y2 = Y_head[:, :half], Y_head[:, half:layout.num_preamble_syms]
        Y_sum, Y_diff = split_sum_diff(Y1, Y2)
        P_half = root_es * preamble_book.symbols_half
        if config.scenario != NLOS:
            H_hat, err_h = lmmse_estimate(Y_sum, P_half, R_H, noise_var / 2.0,
                                          return_error=True)
        if scheme == BENCHMARK:
            theta_half = schedule.theta_preamble[:, :half]
            Lam = build_lambda(P_half, theta_half)
            Z_hat, err_z = lmmse_estimate(Y_diff, Lam, R_Z, noise_var / 2.0,
                                          return_error=True)
    if layout.num_pilot_syms and scheme != BENCHMARK and stage == FIRST_STAGE:
        half = layout.num_pilot_syms // 2
        pil0 = layout.num_preamble_syms
        Y1 = Y_head[:, pil0:pil0 + half]
        Y2 = Y_head[:, pil0 + half:pil0 + layout.num_pilot_syms]
        Y_sum, Y_diff = split_sum_diff(Y1, Y2)
        P_half = root_es * pilot_book.symbols_half
        if config.scenario != NLOS:
            H_hat, err_h = lmmse_estimate(Y_sum, P_half, R_H, noise_var / 2.0,
                                          return_error=True)
        theta_half = schedule.theta_pilot[:, :half]
        Lam = build_lambda(P_half, theta_half)
        Z_hat, err_z = lmmse_estimate(Y_diff, Lam, R_Z, noise_var / 2.0,
                                      return_error=True)

    if stage == SECOND_STAGE and prev_state is not None:
        Z_hat = prev_state.Z_all_hat.copy()
        # reuse penalty: residual error of the refined estimate plus aging
        err_z = prev_state.err_power_cascade \
            + 2.0 * (1.0 - config.rho) * float(np.sum(R_Z))
        if config.scenario == NLOS:
            H_hat = np.zeros_like(channels.H)

    # --- choose the information-segment phases, then send the tail ---
    phi_opt = align_phases(H_hat, Z_hat)
    schedule = design_reflection_schedule(config.n_total, layout, phi_opt)
    Phi = schedule.full_matrix()
    Y_tail = transmit_frame(channels, Phi[:, head:], root_es * X[:, head:],
                            noise_var, rng)
    Y = np.concatenate([Y_head, Y_tail], axis=1)

    # --- decode, optionally with decision-aided refinement ---
    state = EstimatorState(H_hat=H_hat, Z_all_hat=Z_hat,
                           err_power_direct=err_h, err_power_cascade=err_z)
    if refine_iters is None:
        refine_iters = 0 if scheme in (BENCHMARK, COARSE) else config.max_refine_iters

    collected = []
    if refine_iters > 0:
        idd = iterative_refine(Y, schedule, pilot_book, code, state, R_Z,
                               sym_energy, noise_var, refine_iters,
                               config.refine_tol, config.max_idd_iters,
                               config.spa_max_iters, Z_truth=channels.Z_all,
                               collect=collected)
    else:
        extra = sym_energy * (err_h + err_z)
        idd = run_idd(Y, Phi, schedule.layout, code, H_hat, state.Z_all_hat,
                      sym_energy, noise_var, config.max_idd_iters,
                      pilot_book.bits, config.spa_max_iters, extra_noise=extra)

    ber, fer, ber_rounds = _score(idd, collected, info_bits)
    nmse_dir = _nmse_or_zero(H_hat, channels.H)
    nmse_cas = nmse(state.Z_all_hat, channels.Z_all)
    return FrameOutcome(
        nmse_direct=nmse_dir,
        nmse_cascade=nmse_cas,
        ber=ber,
        fer=fer,
        idd_rounds_used=idd.rounds_used if idd is not None else 0,
        refine_iters_used=state.refine_iter,
        pilot_symbols_spent=layout.num_preamble_syms + layout.num_pilot_syms,
        state=state,
        nmse_refine_history=list(state.nmse_history),
        ber_per_round=ber_rounds,
    )


def _score(idd, collected, info_bits):
    if idd is None or idd.decoded_info_bits is None or info_bits.size == 0:
        return 0.0, 0.0, []
    errs = idd.decoded_info_bits != info_bits
    ber = float(np.mean(errs))
    fer = float(np.mean(errs.any(axis=1)))
    first = collected[0] if collected else idd
    ber_rounds = [float(np.mean(bits != info_bits))
                  for bits in first.per_round_info_bits]
    return ber, fer, ber_rounds


def nmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Normalized squared error; undefined for an all-zero reference."""
    denom = np.linalg.norm(truth) ** 2
    if denom == 0:
        raise ValueError("NMSE needs a nonzero reference")
    return float(np.linalg.norm(truth - estimate) ** 2 / denom)


def _nmse_or_zero(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Direct-channel NMSE; a known-zero link estimated as zero scores 0."""
    if np.linalg.norm(truth) == 0:
        return 0.0 if np.linalg.norm(estimate) == 0 else float("inf")
    return nmse(estimate, truth)
