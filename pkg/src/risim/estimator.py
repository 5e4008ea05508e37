"""Pilot design, direct-channel LMMSE estimation, coarse cascaded estimation,
reflection-schedule construction, and decision-aided iterative refinement."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard

from .channel import build_lambda
from .detector import IddResult, run_idd
from .ldpc import CodeSpec, encode
from .modem import PacketLayout, qpsk_map


def make_pilot_partitions(t: int, n_pilot: int):
    """First and second pilot partitions: consecutive index halves."""
    if n_pilot % 2:
        raise ValueError("pilot length must be even")
    half = n_pilot // 2
    p1 = np.arange(t, t + half)
    p2 = np.arange(t + half, t + n_pilot)
    return p1, p2


def split_sum_diff(Y_p1: np.ndarray, Y_p2: np.ndarray):
    """Half-sum isolates the direct link, half-difference the reflected one.

    Requires the transmit convention: repeated pilot symbols and negated
    reflection phases across the two partitions. Either output carries noise
    of variance sigma_n^2 / 2 per entry.
    """
    if Y_p1.shape != Y_p2.shape:
        raise ValueError("partition blocks must have equal shape")
    return (Y_p1 + Y_p2) / 2.0, (Y_p1 - Y_p2) / 2.0


@dataclass
class PilotBook:
    """Known pilot symbols per user: orthogonal sequences repeated across the
    second partition."""

    symbols_half: np.ndarray      # (K, N_p/2) unit-energy QPSK
    n_pilot: int

    @property
    def half_len(self) -> int:
        return self.symbols_half.shape[1]

    @property
    def symbols_full(self) -> np.ndarray:
        """(K, N_p): second half repeats the first."""
        return np.concatenate([self.symbols_half, self.symbols_half], axis=1)

    @property
    def bits(self) -> np.ndarray:
        """(K, 2*N_p) systematic pilot bits reproducing symbols_full under the
        Gray map (each +-1 sequence entry becomes a repeated bit pair)."""
        signs = np.sign(self.symbols_half.real)
        b = ((1.0 - signs) / 2.0).astype(np.uint8)
        half_bits = np.repeat(b, 2, axis=1)
        return np.concatenate([half_bits, half_bits], axis=1)


def make_pilot_book(num_users: int, n_pilot: int) -> PilotBook:
    """Rows of a Sylvester-Hadamard matrix, tiled to the partition length and
    scaled onto the QPSK diagonal."""
    if n_pilot % 2:
        raise ValueError("pilot length must be even")
    half = n_pilot // 2
    order = 1
    while order < num_users:
        order *= 2
    if half % order:
        raise ValueError(
            f"pilot half-length {half} must be a multiple of the Hadamard order {order}")
    rows = hadamard(order)[:num_users]
    tiled = np.tile(rows, (1, half // order)).astype(float)
    return PilotBook(symbols_half=tiled * (1 + 1j) / np.sqrt(2.0), n_pilot=n_pilot)


def _dft_pilot_phases(n_elements: int, n_cols: int) -> np.ndarray:
    """Phase columns for one pilot partition.

    When the partition fits inside the element count and divides it, the
    stated root-of-unity Vandermonde is used (its columns are exactly
    orthogonal). Otherwise full DFT blocks are concatenated, each copy
    cyclically advanced by one column so no two pilot slots repeat the same
    (sequence, phase) pair.
    """
    N = n_elements
    if n_cols <= N and N % n_cols == 0:
        root = np.exp(-4j * np.pi / (2 * n_cols))      # == exp(-2 pi i / n_cols)
        n = np.arange(N)[:, None]
        j = np.arange(n_cols)[None, :]
        return root ** (n * j)
    dft = np.exp(-2j * np.pi * np.outer(np.arange(N), np.arange(N)) / N)
    cols = (np.arange(n_cols) + np.arange(n_cols) // N) % N
    return dft[:, cols]


@dataclass
class ReflectionSchedule:
    """Per-symbol phase vectors for one frame, segmented by packet region."""

    theta_preamble: np.ndarray    # (N, N_pre) optional uncoded pilot phases
    theta_pilot: np.ndarray       # (N, N_p) = [Theta_* -Theta_*]
    theta_info: np.ndarray        # (N, N_info) rank one
    theta_parity: np.ndarray      # (N, N_ps) DFT Vandermonde
    layout: PacketLayout

    def phi(self, i: int) -> np.ndarray:
        return self.full_matrix()[:, i]

    def full_matrix(self) -> np.ndarray:
        lay = self.layout
        N = self.theta_parity.shape[0]
        out = np.empty((N, lay.frame_syms), dtype=complex)
        out[:, lay.preamble_indices] = self.theta_preamble
        out[:, lay.pilot_symbol_indices] = self.theta_pilot
        out[:, lay.info_symbol_indices] = self.theta_info
        out[:, lay.parity_symbol_indices] = self.theta_parity
        return out


def _paired_pilot_phases(n_elements: int, n_pilot: int) -> np.ndarray:
    if n_pilot == 0:
        return np.empty((n_elements, 0), dtype=complex)
    theta_star = _dft_pilot_phases(n_elements, n_pilot // 2)
    return np.concatenate([theta_star, -theta_star], axis=1)


def design_reflection_schedule(n_elements: int, layout: PacketLayout,
                               phi_opt: np.ndarray | None = None) -> ReflectionSchedule:
    """Assemble the frame's reflection phases.

    Pilot regions (embedded and preamble) get negation-paired DFT designs,
    parity symbols a root-of-unity Vandermonde, and information symbols all
    repeat the single alignment vector phi_opt (all-ones when absent).
    """
    N = n_elements
    n_ps = layout.num_parity_syms
    omega = np.exp(-2j * np.pi / n_ps) if n_ps else 1.0
    n = np.arange(N)[:, None]
    j = np.arange(n_ps)[None, :]
    theta_parity = omega ** (n * j)

    if phi_opt is None:
        phi_opt = np.ones(N, dtype=complex)
    phi_opt = np.asarray(phi_opt, dtype=complex)
    if phi_opt.shape != (N,):
        raise ValueError("phi_opt must have one phase per reflecting element")
    if not np.allclose(np.abs(phi_opt), 1.0, atol=1e-9):
        raise ValueError("reflection phases must be unit modulus")
    theta_info = np.tile(phi_opt[:, None], (1, layout.num_info_syms))

    return ReflectionSchedule(
        theta_preamble=_paired_pilot_phases(N, layout.num_preamble_syms),
        theta_pilot=_paired_pilot_phases(N, layout.num_pilot_syms),
        theta_info=theta_info,
        theta_parity=theta_parity,
        layout=layout,
    )


def lmmse_estimate(Y_p: np.ndarray, P: np.ndarray, R: np.ndarray,
                   noise_var: float, return_error: bool = False):
    """Linear MMSE channel estimate for Y = X P + W.

    P: (D, T) known input matrix (physical symbol values); R: channel
    covariance per row of X, either a (D,) diagonal or a (D, D) matrix;
    noise_var: per-entry variance of W. Shrinks toward zero under noise and
    reduces to least squares when noise_var = 0 and P has orthogonal rows.

    With return_error the posterior error power per row (trace of the error
    covariance, summed over the D coefficients) is returned alongside.
    """
    if noise_var < 0:
        raise ValueError("noise variance must be >= 0")
    P = np.asarray(P)
    R = np.asarray(R)
    if R.ndim == 1:
        RP = R[:, None] * P
        r_trace = float(np.sum(R))
    else:
        RP = R @ P
        r_trace = float(np.trace(R).real)
    D, T = P.shape
    if T <= D:
        kernel = P.conj().T @ RP + noise_var * np.eye(T)
        gain = np.linalg.solve(kernel, RP.conj().T)      # (T, D)
    else:
        # push-through form, well posed for wide pilot blocks even at zero noise
        kernel = RP @ P.conj().T + noise_var * np.eye(D)
        gain = P.conj().T @ np.linalg.solve(kernel, np.diag(R) if R.ndim == 1 else R)
    est = Y_p @ gain
    if not return_error:
        return est
    explained = float(np.einsum("dt,td->", RP, gain).real)
    err_power = max(r_trace - explained, 0.0)
    return est, err_power


def coarse_cascade_estimate(Y_cascade: np.ndarray, Lambda: np.ndarray,
                            R_Z: np.ndarray, noise_var: float) -> np.ndarray:
    """Regularized estimate of the concatenated cascade; with fewer columns
    than unknowns this is the minimum-norm solution restricted to the span
    of the measurements."""
    return lmmse_estimate(Y_cascade, Lambda, R_Z, noise_var)


def align_phases(H_hat: np.ndarray, Z_all_hat: np.ndarray) -> np.ndarray:
    """Reflection alignment surrogate: element-wise phase matching of the
    strongest user's cascade against its direct vector (or its own leading
    column when no direct path exists). Falls back to all-ones without a
    usable estimate."""
    M, K = H_hat.shape
    Z3 = Z_all_hat.reshape(M, K, -1)
    N = Z3.shape[2]
    energy = np.sum(np.abs(Z3) ** 2, axis=(0, 2))
    if not np.any(energy > 0):
        return np.ones(N, dtype=complex)
    k = int(np.argmax(energy))
    ref = H_hat[:, k]
    if np.linalg.norm(ref) == 0:
        ref = Z3[:, k, 0]
    corr = ref.conj() @ Z3[:, k, :]                      # (N,)
    phases = np.where(np.abs(corr) > 0, np.exp(-1j * np.angle(corr)), 1.0)
    return phases


@dataclass
class EstimatorState:
    H_hat: np.ndarray
    Z_all_hat: np.ndarray
    refine_iter: int = 0
    nmse_history: list = field(default_factory=list)
    change_history: list = field(default_factory=list)
    sigma_est_sq: float = float("nan")
    err_power_direct: float = 0.0     # residual error power, channel units
    err_power_cascade: float = 0.0


def iterative_refine(Y: np.ndarray, schedule: ReflectionSchedule,
                     pilot_book: PilotBook, code: CodeSpec,
                     state: EstimatorState, R_Z: np.ndarray,
                     sym_energy: float, noise_var: float,
                     max_iters: int, tol: float, idd_rounds: int,
                     spa_max_iters: int = 50,
                     Z_truth: np.ndarray | None = None,
                     collect: list | None = None) -> IddResult | None:
    """Decision-aided refinement of the cascaded estimate.

    Repeats {detect/decode with current estimates -> rebuild the full-frame
    symbol matrix from re-encoded decisions -> re-solve the cascade} until
    the estimate stops moving or the iteration budget runs out. Pilot
    columns always use the true pilot symbols; decoding failures simply feed
    noisier symbols forward. Updates `state` in place and returns the last
    detection result (None when max_iters == 0).
    """
    layout = schedule.layout
    Phi = schedule.full_matrix()
    last = None
    for _ in range(max_iters):
        extra = sym_energy * (state.err_power_direct + state.err_power_cascade)
        last = run_idd(Y, Phi, layout, code, state.H_hat, state.Z_all_hat,
                       sym_energy, noise_var, idd_rounds, pilot_book.bits,
                       spa_max_iters, extra_noise=extra)
        if collect is not None:
            collect.append(last)
        X_unit = rebuild_frame_symbols(last, layout, code, pilot_book)
        Lam = build_lambda(np.sqrt(sym_energy) * X_unit, Phi)
        Y_res = Y - np.sqrt(sym_energy) * (state.H_hat @ X_unit)
        Z_new, err = lmmse_estimate(Y_res, Lam, R_Z, noise_var, return_error=True)

        prev_norm = np.linalg.norm(state.Z_all_hat)
        change = np.linalg.norm(Z_new - state.Z_all_hat) / prev_norm \
            if prev_norm > 0 else np.inf
        state.Z_all_hat = Z_new
        state.err_power_cascade = err
        state.refine_iter += 1
        state.change_history.append(change)
        state.sigma_est_sq = change
        if Z_truth is not None:
            err_sq = np.linalg.norm(Z_truth - Z_new) ** 2
            state.nmse_history.append(err_sq / np.linalg.norm(Z_truth) ** 2)
        if change < tol:
            break
    return last


def rebuild_frame_symbols(idd: IddResult, layout: PacketLayout, code: CodeSpec,
                          pilot_book: PilotBook) -> np.ndarray:
    """Decoded bits back to unit-energy symbols for the whole frame.

    Users whose parity checks passed are re-encoded from their systematic
    decisions (identical to their hard output, by construction); for failed
    users the decoder's per-bit decisions are kept as-is, since re-encoding
    would amplify a few systematic errors into half-wrong parity symbols.
    Pilot bits are always forced to their known values.
    """
    bits = idd.state.hard_bits.copy()
    bits[:, layout.pilot_bit_indices] = pilot_book.bits[:, :2 * layout.num_pilot_syms]
    ok = idd.state.parity_ok
    if ok.any():
        sys_bits = bits[ok, :layout.info_len]
        bits[ok] = encode(sys_bits, code)
    X = qpsk_map(bits)                                   # (K, T_cw)
    if layout.num_preamble_syms:
        pre_book = make_pilot_book(X.shape[0], layout.num_preamble_syms)
        X = np.concatenate([pre_book.symbols_full, X], axis=1)
    return X
