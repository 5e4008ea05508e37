"""Soft-input soft-output MMSE detection with successive interference
cancellation, and the detect/decode exchange loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ldpc import LLR_MAX, CodeSpec, spa_decode
from .modem import PacketLayout, hard_bits_to_llrs, qpsk_soft_demap, soft_symbol_stats

_MU_FLOOR = 1e-12


def covariance_profile(soft_vars: np.ndarray, k: int) -> np.ndarray:
    """Diagonal interference profile for user k: own slot pinned to 1, the
    rest carry the normalized soft symbol variances."""
    delta = np.asarray(soft_vars, dtype=float).copy()
    if np.any(delta < 0) or np.any(delta > 1.0 + 1e-9):
        raise ValueError("normalized symbol variances must lie in [0, 1]")
    delta[..., k] = 1.0
    return delta


def mmse_sic_filter(H_bar: np.ndarray, delta: np.ndarray, noise_var: float,
                    sym_energy: float, k: int) -> np.ndarray:
    """Per-user MMSE filter ((noise/Es) I + H diag(delta) H^H)^-1 h_k."""
    M = H_bar.shape[0]
    A = (noise_var / sym_energy) * np.eye(M) \
        + (H_bar * delta[None, :]) @ H_bar.conj().T
    return np.linalg.solve(A, H_bar[:, k])


def detect_symbol(w: np.ndarray, y_cleaned: np.ndarray, h_k: np.ndarray):
    """Filter output plus its effective gain and residual variance under the
    Gaussian approximation (unit symbol energy)."""
    x_hat = w.conj() @ y_cleaned
    mu = float(np.real(w.conj() @ h_k))
    nu = max(mu, _MU_FLOOR) * max(1.0 - mu, _MU_FLOOR)
    return x_hat, mu, nu


@dataclass
class SoftState:
    """Per-user soft information exchanged between detector and decoders."""

    prior_llrs: np.ndarray        # (K, n) decoder extrinsic fed to the detector
    extrinsic_llrs: np.ndarray    # (K, n) detector extrinsic fed to the decoder
    posterior_llrs: np.ndarray    # (K, n) decoder output
    soft_means: np.ndarray        # (K, T) unit-energy symbol means
    soft_vars: np.ndarray         # (K, T) in [0, 1]
    hard_bits: np.ndarray         # (K, n)
    parity_ok: np.ndarray         # (K,) bool


@dataclass
class IddResult:
    state: SoftState
    rounds_used: int
    per_round_info_bits: list = field(default_factory=list)   # (K, n_info) per round
    decoded_info_bits: np.ndarray = None
    decoded_systematic: np.ndarray = None


def sic_order(H_bar_stack: np.ndarray) -> np.ndarray:
    """Users sorted by descending mean effective-channel energy; ties keep
    index order."""
    energy = np.mean(np.sum(np.abs(H_bar_stack) ** 2, axis=1), axis=0)
    return np.argsort(-energy, kind="stable")


def detect_frame(Y: np.ndarray, H_bar_stack: np.ndarray, noise_var: float,
                 sym_energy: float, prior_llrs: np.ndarray,
                 order: np.ndarray):
    """One soft-cancellation detection pass over T symbols for all users.

    Y: (M, T) physical received block; H_bar_stack: (T, M, K) effective
    channels in channel units; prior_llrs: (K, 2T) interleaved bit priors.
    Users are visited in `order`; soft statistics of already-detected users
    are refreshed with their detector output before later users are
    processed.

    Returns interleaved detector-extrinsic LLRs (K, 2T).
    """
    T, M, K = H_bar_stack.shape
    Yu = Y.T / np.sqrt(sym_energy)                       # (T, M) unit-symbol domain
    Hs = H_bar_stack
    rho = noise_var / sym_energy

    cur_means, cur_vars = soft_symbol_stats(prior_llrs)  # (K, T) each
    llrs = np.empty((K, 2 * T))

    eye = np.eye(M)
    for k in order:
        delta = cur_vars.T.copy()                        # (T, K)
        delta[:, k] = 1.0
        A = rho * eye[None, :, :] + np.einsum(
            "tmk,tk,tnk->tmn", Hs, delta, Hs.conj(), optimize=True)
        # perfect priors leave a rank-one covariance; keep the solve posed
        floor = 1e-14 * np.einsum("tmm->t", A).real / M
        A = A + floor[:, None, None] * eye[None, :, :]
        h_k = Hs[:, :, k]                                # (T, M)
        w = np.linalg.solve(A, h_k[:, :, None])[:, :, 0]  # (T, M)

        interference = np.einsum("tmk,kt->tm", Hs, cur_means, optimize=True) \
            - h_k * cur_means[k][:, None]
        y_clean = Yu - interference
        x_hat = np.einsum("tm,tm->t", w.conj(), y_clean)
        mu = np.clip(np.real(np.einsum("tm,tm->t", w.conj(), h_k)),
                     _MU_FLOOR, 1.0 - _MU_FLOOR)
        z = x_hat / mu
        nu_z = (1.0 - mu) / mu
        pair = qpsk_soft_demap(z, nu_z)                  # (2T,)
        llrs[k] = pair

        # refresh this user's statistics for the remaining SIC stages
        post = np.clip(prior_llrs[k] + pair, -LLR_MAX, LLR_MAX)
        cur_means[k], cur_vars[k] = soft_symbol_stats(post)
    return llrs


def effective_channel_stack(H_hat: np.ndarray, Z_all_hat: np.ndarray,
                            Phi: np.ndarray) -> np.ndarray:
    """Per-symbol equivalent channels (T, M, K) from current estimates."""
    M, K = H_hat.shape
    Z3 = Z_all_hat.reshape(M, K, -1)
    return H_hat[None, :, :] + np.einsum("mkn,nt->tmk", Z3, Phi, optimize=True)


def run_idd(Y: np.ndarray, Phi: np.ndarray, layout: PacketLayout, code: CodeSpec,
            H_hat: np.ndarray, Z_all_hat: np.ndarray, sym_energy: float,
            noise_var: float, rounds: int, pilot_bits: np.ndarray,
            spa_max_iters: int = 50, extra_noise: float = 0.0) -> IddResult:
    """Iterative detection and decoding over one frame.

    Y, Phi cover the full frame including any uncoded preamble; only the
    codeword region enters detection. `rounds` counts detect->decode passes,
    so rounds=1 is plain soft MMSE detection followed by one decoding.
    Pilot bit positions carry saturated LLRs throughout. Decoder
    non-convergence is reported via the parity flags, never raised.

    extra_noise inflates the detector's noise term by the residual
    channel-estimation error power (channel units per unit symbol energy),
    keeping LLRs honest under coarse estimates.
    """
    if rounds < 1:
        raise ValueError("at least one detection/decoding pass is required")
    K = H_hat.shape[1]
    P = layout.num_preamble_syms
    noise_var = noise_var + extra_noise
    Y_cw = Y[:, P:]
    Phi_cw = Phi[:, P:]
    Hs = effective_channel_stack(H_hat, Z_all_hat, Phi_cw)
    order = sic_order(Hs)

    pilot_llrs = hard_bits_to_llrs(pilot_bits)           # (K, 2*N_p)
    pilot_pos = layout.pilot_bit_indices
    priors = np.zeros((K, code.n))
    priors[:, pilot_pos] = pilot_llrs

    result = IddResult(state=None, rounds_used=0)
    posterior = priors.copy()
    det_llrs = np.zeros_like(priors)
    hard = np.zeros((K, code.n), dtype=np.uint8)
    ok = np.zeros(K, dtype=bool)

    for r in range(rounds):
        det_llrs = detect_frame(Y_cw, Hs, noise_var, sym_energy, priors, order)
        dec_in = det_llrs.copy()
        dec_in[:, pilot_pos] = pilot_llrs
        posterior, hard, ok = spa_decode(dec_in, code, spa_max_iters)
        extrinsic = np.clip(posterior - dec_in, -LLR_MAX, LLR_MAX)
        priors = extrinsic
        priors[:, pilot_pos] = pilot_llrs
        result.rounds_used = r + 1
        result.per_round_info_bits.append(
            hard[:, 2 * layout.num_pilot_syms:layout.info_len].copy())
        if ok.all():
            break

    means, variances = soft_symbol_stats(priors)
    result.state = SoftState(prior_llrs=priors, extrinsic_llrs=det_llrs,
                             posterior_llrs=posterior, soft_means=means,
                             soft_vars=variances, hard_bits=hard, parity_ok=ok)
    result.decoded_info_bits = hard[:, 2 * layout.num_pilot_syms:layout.info_len]
    result.decoded_systematic = hard[:, :layout.info_len]
    return result
