"""Geometry-scaled Rayleigh channels, block-to-block Gauss-Markov evolution,
and received-signal synthesis for the grouped multi-surface model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import NLOS, SystemConfig


@dataclass
class LinkGains:
    """Linear amplitude scales per link, derived from the two path-loss laws."""

    gain_direct: np.ndarray          # (K,) zero in NLOS
    gain_ap_ris: np.ndarray          # (L,)
    gain_ris_user: np.ndarray        # (L, K)
    dist_direct: np.ndarray          # (K,) meters
    dist_ap_ris: np.ndarray          # (L,)
    dist_ris_user: np.ndarray        # (L, K)
    user_positions: np.ndarray       # (K, 3)

    def cascade_gains(self) -> np.ndarray:
        """Per-element cascade amplitude, shape (L, K): AP->RIS x RIS->user."""
        return self.gain_ap_ris[:, None] * self.gain_ris_user

    def cascade_ref_gain_sq(self, elements_per_ris: int) -> float:
        """Aggregate reflected-path power gain (per antenna, per user), averaged
        over users: N elements contribute incoherently under random phases."""
        per_user = elements_per_ris * np.sum(self.cascade_gains() ** 2, axis=0)
        return float(np.mean(per_user))

    def cascade_cov_diag(self, elements_per_ris: int) -> np.ndarray:
        """Diagonal of the cascaded-channel covariance, shape (K*L*N,), ordered
        to match the concatenated cascade matrix columns."""
        L, K = self.gain_ris_user.shape
        per_elem = np.repeat(self.cascade_gains() ** 2, elements_per_ris, axis=0)  # (L*N, K)
        return per_elem.T.reshape(-1)  # user-major: [k=0 elems, k=1 elems, ...]


@dataclass
class GaussMarkovParams:
    rho: float
    innovation_scale: float = 1.0    # multiplies each link's own gain

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")


@dataclass
class ChannelSet:
    """One block-fading realization of all constituent links."""

    H: np.ndarray                    # (M, K) direct
    G_list: list                     # L matrices (M, N)
    F_list: list                     # L matrices (N, K)
    gains: LinkGains
    block_index: int = 0
    Z_all: np.ndarray = field(init=False)

    def __post_init__(self):
        self.Z_all = cascade_matrix(self.G_list, self.F_list)

    @property
    def G_p(self) -> np.ndarray:
        return np.concatenate(self.G_list, axis=1)

    @property
    def F_p(self) -> np.ndarray:
        return np.concatenate(self.F_list, axis=0)


def pathloss_db(dist: np.ndarray, law: tuple) -> np.ndarray:
    """Evaluate intercept + slope*log10(d) in dB; rejects zero distance."""
    dist = np.asarray(dist, dtype=float)
    if np.any(dist <= 0):
        raise ValueError("coincident positions: path loss undefined at d = 0")
    intercept, slope = law
    return intercept + slope * np.log10(dist)


def build_geometry(config: SystemConfig, rng=None) -> LinkGains:
    """Place users uniformly in a disc around the user center and convert
    Euclidean distances to linear amplitude gains 10^(-PL/20).

    User placement is seeded from the config so a run sees one fixed drop.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    K, L = config.num_users, config.num_ris
    center = np.asarray(config.user_center)
    radius = config.user_radius * np.sqrt(rng.uniform(size=K))
    angle = rng.uniform(0.0, 2 * np.pi, size=K)
    users = np.tile(center, (K, 1))
    users[:, 0] += radius * np.cos(angle)
    users[:, 1] += radius * np.sin(angle)

    ap = np.asarray(config.ap_position)
    ris = np.asarray(config.ris_positions, dtype=float).reshape(L, 3)

    d_direct = np.linalg.norm(users - ap, axis=1)
    d_ap_ris = np.linalg.norm(ris - ap, axis=1)
    d_ris_user = np.linalg.norm(users[None, :, :] - ris[:, None, :], axis=2)

    g_direct = 10.0 ** (-pathloss_db(d_direct, config.pathloss_direct) / 20.0)
    if config.scenario == NLOS:
        g_direct = np.zeros_like(g_direct)
    g_ap_ris = 10.0 ** (-pathloss_db(d_ap_ris, config.pathloss_reflected) / 20.0)
    g_ris_user = 10.0 ** (-pathloss_db(d_ris_user, config.pathloss_reflected) / 20.0)

    return LinkGains(g_direct, g_ap_ris, g_ris_user,
                     d_direct, d_ap_ris, d_ris_user, users)


def _crandn(rng, *shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian, unit variance per entry."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def cascade_matrix(G_list, F_list) -> np.ndarray:
    """Concatenated per-user cascade [Z_1 ... Z_K], Z_k = G_p diag(f_k)."""
    G_p = np.concatenate(G_list, axis=1)                 # (M, L*N)
    F_p = np.concatenate(F_list, axis=0)                 # (L*N, K)
    M, n_tot = G_p.shape
    K = F_p.shape[1]
    Z = np.empty((M, K * n_tot), dtype=complex)
    for k in range(K):
        Z[:, k * n_tot:(k + 1) * n_tot] = G_p * F_p[:, k][None, :]
    return Z


def draw_channels(gains: LinkGains, config: SystemConfig, rng,
                  block_index: int = 0) -> ChannelSet:
    """Fresh i.i.d. Rayleigh draw; per-entry variance equals the link gain^2."""
    M, K, L, N = (config.num_ap_antennas, config.num_users,
                  config.num_ris, config.elements_per_ris)
    H = _crandn(rng, M, K) * gains.gain_direct[None, :]
    G_list = [_crandn(rng, M, N) * gains.gain_ap_ris[j] for j in range(L)]
    F_list = [_crandn(rng, N, K) * gains.gain_ris_user[j][None, :] for j in range(L)]
    return ChannelSet(H, G_list, F_list, gains, block_index)


def evolve_channel(prev: ChannelSet, params: GaussMarkovParams, rng) -> ChannelSet:
    """One first-order Gauss-Markov step applied to every constituent matrix.

    The innovation variance matches each matrix's own link gain so that the
    stationary per-entry power is preserved block to block.
    """
    rho = params.rho
    w = np.sqrt(max(0.0, 1.0 - rho * rho)) * params.innovation_scale
    g = prev.gains

    H = rho * prev.H + w * _crandn(rng, *prev.H.shape) * g.gain_direct[None, :]
    G_list = [rho * Gj + w * _crandn(rng, *Gj.shape) * g.gain_ap_ris[j]
              for j, Gj in enumerate(prev.G_list)]
    F_list = [rho * Fj + w * _crandn(rng, *Fj.shape) * g.gain_ris_user[j][None, :]
              for j, Fj in enumerate(prev.F_list)]
    return ChannelSet(H, G_list, F_list, g, prev.block_index + 1)


def assemble_effective(channels: ChannelSet, phi: np.ndarray) -> np.ndarray:
    """Equivalent AP-to-users channel H + G_p diag(phi) F_p for one phase vector."""
    phi = np.asarray(phi)
    n_tot = channels.G_p.shape[1]
    if phi.shape != (n_tot,):
        raise ValueError(f"phase vector must have length {n_tot}, got {phi.shape}")
    return channels.H + (channels.G_p * phi[None, :]) @ channels.F_p


def effective_from_estimates(H_hat: np.ndarray, Z_all_hat: np.ndarray,
                             phi: np.ndarray) -> np.ndarray:
    """Equivalent channel rebuilt from receiver-side estimates: col k is
    h_k + Z_k phi."""
    M = H_hat.shape[0]
    K = H_hat.shape[1]
    Z3 = Z_all_hat.reshape(M, K, -1)
    return H_hat + np.einsum("mkn,n->mk", Z3, phi)


def transmit(channels: ChannelSet, phi: np.ndarray, x: np.ndarray,
             noise_var: float, rng) -> np.ndarray:
    """Received vector y = (H + G_p diag(phi) F_p) x + n, noise_var per antenna."""
    H_bar = assemble_effective(channels, phi)
    y = H_bar @ x
    if noise_var > 0:
        y = y + np.sqrt(noise_var) * _crandn(rng, H_bar.shape[0])
    return y


def transmit_frame(channels: ChannelSet, Phi: np.ndarray, X: np.ndarray,
                   noise_var: float, rng) -> np.ndarray:
    """Vectorized multi-symbol synthesis.

    Phi: (N_total, T) per-symbol phases; X: (K, T) symbols (physical energy).
    Returns Y: (M, T). Uses the concatenated-cascade identity, so one matmul
    covers every per-symbol reflection state.
    """
    lam = build_lambda(X, Phi)
    Y = channels.H @ X + channels.Z_all @ lam
    if noise_var > 0:
        Y = Y + np.sqrt(noise_var) * _crandn(rng, *Y.shape)
    return Y


def build_lambda(X: np.ndarray, Phi: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker products: column j is x^(j) kron phi^(j).

    X: (K, T), Phi: (N_total, T) -> (K*N_total, T).
    """
    K, T = X.shape
    N, T2 = Phi.shape
    if T != T2:
        raise ValueError("symbol and phase blocks must have equal length")
    return (X[:, None, :] * Phi[None, :, :]).reshape(K * N, T)
