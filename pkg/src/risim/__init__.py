"""Link-level simulator for multi-RIS multiuser MIMO uplinks with iterative
detection, decoding and channel estimation."""

from .channel import (ChannelSet, GaussMarkovParams, LinkGains,
                      assemble_effective, build_geometry, build_lambda,
                      draw_channels, evolve_channel, transmit, transmit_frame)
from .config import LOS, NLOS, SystemConfig, los_default, nlos_default
from .detector import SoftState, covariance_profile, detect_frame, run_idd
from .estimator import (EstimatorState, PilotBook, ReflectionSchedule,
                        align_phases, coarse_cascade_estimate,
                        design_reflection_schedule, iterative_refine,
                        lmmse_estimate, make_pilot_book, make_pilot_partitions,
                        split_sum_diff)
from .harness import (MetricsRecord, calibrate, run_monte_carlo,
                      spectral_efficiency, write_results)
from .ldpc import CodeSpec, build_ldpc, encode, spa_decode
from .link import SCHEMES, FrameOutcome, nmse, simulate_scheme_frame
from .modem import PacketLayout, qpsk_map, qpsk_soft_demap, soft_symbol_stats
from .tracker import TrackingPolicy, nmse_last, run_tracking, should_reuse

__version__ = "0.1.0"
