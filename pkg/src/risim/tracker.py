"""Temporal reuse of refined estimates: the reuse-vs-refresh predicate and
the two-stage tracking protocol over a frame schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import GaussMarkovParams, build_geometry, draw_channels, evolve_channel
from .config import NLOS, SystemConfig
from .ldpc import CodeSpec
from .link import FIRST_STAGE, SECOND_STAGE, TRACKED, FrameOutcome, simulate_scheme_frame


@dataclass
class TrackingPolicy:
    scenario: str
    pilots_first_frame: int          # N_p
    pilots_steady_los: int           # N_p'
    pilots_steady_nlos: int          # N_p''
    refresh_period: int              # N_f
    rho: float
    sigma_est_sq: float

    def __post_init__(self):
        if self.refresh_period < 1:
            raise ValueError("refresh period must be >= 1")
        if self.scenario == NLOS and self.pilots_steady_nlos > self.pilots_first_frame // 2:
            raise ValueError("steady-state NLOS pilots must satisfy N_p'' <= N_p / 2")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.sigma_est_sq < 0:
            raise ValueError("sigma_est_sq must be >= 0")

    @classmethod
    def from_config(cls, config: SystemConfig) -> "TrackingPolicy":
        return cls(scenario=config.scenario,
                   pilots_first_frame=config.pilot_len,
                   pilots_steady_los=config.pilot_len_steady_los,
                   pilots_steady_nlos=config.pilot_len_steady_nlos,
                   refresh_period=config.frames_per_schedule,
                   rho=config.rho,
                   sigma_est_sq=config.sigma_est_sq)

    def steady_pilots(self) -> int:
        return self.pilots_steady_nlos if self.scenario == NLOS \
            else self.pilots_steady_los

    def pilot_spend(self, frame_index: int) -> int:
        if frame_index % self.refresh_period == 0:
            return self.pilots_first_frame
        return self.steady_pilots()


def nmse_last(rho: float, sigma_est_sq: float) -> float:
    """Predicted error of reusing the previous refined estimate: the aging
    term 2(1 - rho) plus the residual estimation error."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if sigma_est_sq < 0:
        raise ValueError("sigma_est_sq must be >= 0")
    return 2.0 * (1.0 - rho) + sigma_est_sq


def should_reuse(nmse_reuse: float, nmse_coarse: float) -> bool:
    """Reuse the previous estimate only when strictly better than a fresh
    coarse one."""
    for v in (nmse_reuse, nmse_coarse):
        if not np.isfinite(v) or v < 0:
            raise ValueError("NMSE predictions must be finite and >= 0")
    return nmse_reuse < nmse_coarse


def run_tracking(config: SystemConfig, policy: TrackingPolicy, num_frames: int,
                 code: CodeSpec, sym_energy: float, rng) -> list[FrameOutcome]:
    """Simulate a tracked schedule: a full first-stage frame at every refresh
    index, second-stage frames (reused cascade estimate, reduced pilots) in
    between, channels evolving block to block."""
    if num_frames < 1:
        raise ValueError("at least one frame is required")
    gains = build_geometry(config)
    channels = draw_channels(gains, config, rng)
    gm = GaussMarkovParams(rho=policy.rho)

    outcomes = []
    prev_state = None
    for b in range(num_frames):
        refresh = b % policy.refresh_period == 0
        stage = FIRST_STAGE if refresh else SECOND_STAGE
        out = simulate_scheme_frame(TRACKED, stage, config, code, channels,
                                    sym_energy, rng,
                                    prev_state=None if refresh else prev_state)
        outcomes.append(out)
        prev_state = out.state
        if b + 1 < num_frames:
            channels = evolve_channel(channels, gm, rng)
    return outcomes
