"""QPSK mapping, exact soft demapping, per-symbol soft statistics, and the
frame layout that places known pilot bits inside the systematic part."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ldpc import LLR_MAX

_SQRT2 = np.sqrt(2.0)


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped unit-energy QPSK; bit pair (b0, b1) -> ((1-2b0)+j(1-2b1))/sqrt2.

    Accepts (..., 2T) bits, returns (..., T) symbols.
    """
    b = np.asarray(bits)
    if b.shape[-1] % 2:
        raise ValueError("QPSK needs an even number of bits")
    i = 1.0 - 2.0 * b[..., 0::2]
    q = 1.0 - 2.0 * b[..., 1::2]
    return (i + 1j * q) / _SQRT2


def qpsk_soft_demap(symbol_estimate: np.ndarray, noise_var) -> np.ndarray:
    """Exact LLRs under a circular-Gaussian residual of total variance nu:
    LLR_I = 2*sqrt2*Re(z)/nu and LLR_Q likewise on Im(z).

    Returns interleaved bit LLRs, shape (..., 2T), clipped to +-LLR_MAX.
    """
    z = np.asarray(symbol_estimate)
    nu = np.asarray(noise_var, dtype=float)
    if np.any(nu <= 0):
        raise ValueError("noise variance must be positive")
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = 2.0 * _SQRT2 * z.real / nu
    out[..., 1::2] = 2.0 * _SQRT2 * z.imag / nu
    return np.clip(out, -LLR_MAX, LLR_MAX)


def soft_symbol_stats(llrs: np.ndarray, sym_energy: float = 1.0):
    """Per-symbol mean and variance from interleaved bit LLRs.

    For QPSK with independent I/Q bits the mean is
    (tanh(L_I/2) + j tanh(L_Q/2)) * sqrt(Es/2) and the conditional variance
    collapses to Es - |mean|^2.
    """
    L = np.clip(np.asarray(llrs, dtype=float), -LLR_MAX, LLR_MAX)
    ti = np.tanh(0.5 * L[..., 0::2])
    tq = np.tanh(0.5 * L[..., 1::2])
    mean = (ti + 1j * tq) * np.sqrt(sym_energy / 2.0)
    var = sym_energy - np.abs(mean) ** 2
    return mean, np.maximum(var, 0.0)


def hard_bits_to_llrs(bits: np.ndarray) -> np.ndarray:
    """Saturated LLRs for known bits (pilots)."""
    return LLR_MAX * (1.0 - 2.0 * np.asarray(bits, dtype=float))


@dataclass
class PacketLayout:
    """Symbol-index bookkeeping for one user's frame of n/2 QPSK symbols.

    Embedded pilot symbols sit at the head of the systematic part; the second
    pilot half repeats the first so the sum/difference protocol applies.
    An optional uncoded preamble is prepended (steady-state direct-channel
    pilots), in which case the codeword occupies the tail of the frame.
    """

    block_len: int                     # LDPC n
    num_pilot_syms: int                # N_p (embedded, coded)
    num_preamble_syms: int = 0         # uncoded pilots ahead of the codeword

    def __post_init__(self):
        if self.block_len % 4:
            raise ValueError("block length must map to an even symbol count")
        if self.num_pilot_syms % 2:
            raise ValueError("pilot symbol count must be even")
        k = self.block_len // 2
        if 2 * self.num_pilot_syms > k:
            raise ValueError("pilot bits exceed the systematic part")

    @property
    def codeword_syms(self) -> int:
        return self.block_len // 2

    @property
    def frame_syms(self) -> int:
        return self.num_preamble_syms + self.codeword_syms

    @property
    def info_len(self) -> int:
        """LDPC systematic length (pilot bits + information bits)."""
        return self.block_len // 2

    @property
    def num_info_bits(self) -> int:
        return self.info_len - 2 * self.num_pilot_syms

    @property
    def num_parity_syms(self) -> int:
        return (self.block_len - self.info_len) // 2

    @property
    def num_info_syms(self) -> int:
        return self.codeword_syms - self.num_pilot_syms - self.num_parity_syms

    # symbol indices are frame positions; the codeword starts after the preamble

    @property
    def preamble_indices(self) -> np.ndarray:
        return np.arange(self.num_preamble_syms)

    @property
    def pilot_symbol_indices(self) -> np.ndarray:
        return self.num_preamble_syms + np.arange(self.num_pilot_syms)

    @property
    def info_symbol_indices(self) -> np.ndarray:
        start = self.num_preamble_syms + self.num_pilot_syms
        return start + np.arange(self.num_info_syms)

    @property
    def parity_symbol_indices(self) -> np.ndarray:
        start = self.num_preamble_syms + self.num_pilot_syms + self.num_info_syms
        return start + np.arange(self.num_parity_syms)

    @property
    def pilot_bit_indices(self) -> np.ndarray:
        """Codeword bit positions holding pilot bits."""
        return np.arange(2 * self.num_pilot_syms)

    def assemble_systematic(self, pilot_bits: np.ndarray,
                            info_bits: np.ndarray) -> np.ndarray:
        """Concatenate known pilot bits and information bits into the encoder
        input; accepts batched (B, .) arrays."""
        pilot_bits = np.asarray(pilot_bits)
        info_bits = np.asarray(info_bits)
        if pilot_bits.shape[-1] != 2 * self.num_pilot_syms:
            raise ValueError("pilot bit count does not match layout")
        if info_bits.shape[-1] != self.num_info_bits:
            raise ValueError("info bit count does not match layout")
        return np.concatenate([pilot_bits, info_bits], axis=-1)
