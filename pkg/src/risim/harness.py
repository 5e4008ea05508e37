"""Experiment orchestration: Monte Carlo sweeps over SNR and scheme, metric
aggregation, deterministic CSV persistence, and calibration of the coarse
estimator."""

from __future__ import annotations

import json
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .channel import build_geometry, draw_channels
from .config import SystemConfig, snr_to_symbol_energy
from .ldpc import build_ldpc
from .link import (BENCHMARK, COARSE, FIRST_STAGE, PROPOSED, SCHEMES, TRACKED,
                   FrameOutcome, benchmark_preamble_len, nmse,
                   simulate_scheme_frame)
from .modem import PacketLayout
from .tracker import TrackingPolicy, run_tracking

CSV_COLUMNS = (
    "scheme", "snr_db", "frame_index", "trials",
    "idd_iters_used", "refine_iters_used",
    "nmse_direct", "nmse_cascade", "ber", "fer",
    "spectral_efficiency", "pilot_symbols_spent",
    "nmse_direct_hw", "nmse_cascade_hw", "ber_hw", "fer_hw",
)


@dataclass
class MetricsRecord:
    snr_db: float
    frame_index: int
    idd_iters_used: float
    refine_iters_used: float
    nmse_direct: float
    nmse_cascade: float
    ber: float
    fer: float
    spectral_efficiency: float
    pilot_symbols_spent: float
    wall_time: float = 0.0


def record_from_outcome(out: FrameOutcome, snr_db: float, frame_index: int,
                        se: float, wall_time: float = 0.0) -> MetricsRecord:
    return MetricsRecord(
        snr_db=snr_db, frame_index=frame_index,
        idd_iters_used=out.idd_rounds_used,
        refine_iters_used=out.refine_iters_used,
        nmse_direct=out.nmse_direct, nmse_cascade=out.nmse_cascade,
        ber=out.ber, fer=out.fer, spectral_efficiency=se,
        pilot_symbols_spent=out.pilot_symbols_spent, wall_time=wall_time)


def spectral_efficiency(layout: PacketLayout, policy: TrackingPolicy,
                        frames_elapsed: int) -> float:
    """Deterministic throughput proxy: QPSK bits x code rate, discounted by
    the average per-frame pilot overhead relative to the data block length.
    Overhead above a full block drives the value negative."""
    if frames_elapsed < 1:
        raise ValueError("frames_elapsed must be >= 1")
    s_block = layout.codeword_syms
    q = 2.0
    rate = layout.info_len / layout.block_len
    p_total = sum(policy.pilot_spend(b) for b in range(frames_elapsed))
    p_avg = p_total / frames_elapsed
    return q * rate * (s_block - p_avg) / s_block


def scheme_policy(scheme: str, config: SystemConfig) -> TrackingPolicy:
    """Pilot-accounting policy per scheme: tracked follows the two-stage
    schedule, everything else repeats its frame-0 budget every frame."""
    if scheme == TRACKED:
        return TrackingPolicy.from_config(config)
    if scheme == BENCHMARK:
        n = benchmark_preamble_len(config)
        return TrackingPolicy(config.scenario, n, n, n // 2, 1,
                              config.rho, config.sigma_est_sq)
    n = config.pilot_len
    return TrackingPolicy(config.scenario, n, n,
                          min(n // 2, config.pilot_len_steady_nlos), 1,
                          config.rho, config.sigma_est_sq)


def _rng_for(master_seed: int, scheme: str, snr_idx: int, trial: int):
    """Documented counter scheme: one master seed, per-trial streams keyed by
    (scheme index, SNR index, trial index), so trials are order-independent."""
    key = (SCHEMES.index(scheme), snr_idx, trial)
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def worker_count() -> int:
    """Worker-pool size; RISIM_WORKERS overrides the serial default."""
    raw = os.environ.get("RISIM_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"RISIM_WORKERS must be an integer, got {raw!r}")
    return max(1, n)


_WORKER_STATE: dict = {}


def _worker_init(cfg_text: str):
    config = SystemConfig.from_text(cfg_text)
    _WORKER_STATE["config"] = config
    _WORKER_STATE["code"] = build_ldpc(config.ldpc_block_len, config.ldpc_rate,
                                       config.ldpc_seed)
    _WORKER_STATE["gains"] = build_geometry(config)


def _worker_trial(args):
    """One independent trial, reconstructed purely from the counter key so
    results do not depend on scheduling order. Returns MetricsRecords."""
    scheme, snr_idx, snr_db, trial, seed, es, se, refine_iters = args
    config = _WORKER_STATE["config"]
    code = _WORKER_STATE["code"]
    gains = _WORKER_STATE["gains"]
    rng = _rng_for(seed, scheme, snr_idx, trial)
    t0 = time.perf_counter()
    if scheme == TRACKED:
        policy = scheme_policy(scheme, config)
        outs = run_tracking(config, policy, policy.refresh_period, code, es, rng)
        dt = (time.perf_counter() - t0) / len(outs)
        return [record_from_outcome(o, snr_db, b, se, dt)
                for b, o in enumerate(outs)]
    channels = draw_channels(gains, config, rng)
    out = simulate_scheme_frame(scheme, FIRST_STAGE, config, code, channels,
                                es, rng, refine_iters=refine_iters)
    return [record_from_outcome(out, snr_db, 0, se, time.perf_counter() - t0)]


def run_monte_carlo(config: SystemConfig, schemes=SCHEMES, frames: int | None = None,
                    seed: int | None = None, refine_iters: int | None = None,
                    progress=None):
    """Run the sweep and return aggregated rows (list of dicts, CSV order).

    For the tracked scheme, frames are grouped into schedules of length N_f
    whose per-frame-index statistics are averaged across trials; the other
    schemes simulate independent single frames. Trials run serially or on a
    process pool (RISIM_WORKERS); either way the aggregate is identical.
    """
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme '{s}'")
    frames = config.mc_frames if frames is None else frames
    if frames < 0:
        raise ValueError("frame count must be >= 0")
    seed = config.rng_seed if seed is None else seed
    gains = build_geometry(config)
    ref_gain_sq = gains.cascade_ref_gain_sq(config.elements_per_ris)
    layout_se = PacketLayout(config.ldpc_block_len, 0, 0)

    point_tasks = []
    for scheme in schemes:
        policy = scheme_policy(scheme, config)
        se = spectral_efficiency(layout_se, policy, policy.refresh_period)
        for snr_idx, snr_db in enumerate(config.snr_grid):
            es = snr_to_symbol_energy(snr_db, config.noise_power, ref_gain_sq)
            if frames == 0:
                n_trials = 0
            elif scheme == TRACKED:
                n_trials = max(1, frames // policy.refresh_period)
            else:
                n_trials = frames
            trials = [(scheme, snr_idx, snr_db, trial, seed, es, se, refine_iters)
                      for trial in range(n_trials)]
            point_tasks.append((scheme, snr_db, trials))

    workers = worker_count()
    rows = []
    t0 = time.perf_counter()
    pool = None
    try:
        if workers > 1:
            import multiprocessing
            pool = multiprocessing.Pool(workers, initializer=_worker_init,
                                        initargs=(config.to_text(),))
        else:
            _worker_init(config.to_text())
        for scheme, snr_db, trials in point_tasks:
            if not trials:
                continue
            if pool is not None:
                results = pool.map(_worker_trial, trials, chunksize=1)
            else:
                results = [_worker_trial(t) for t in trials]
            by_frame: dict[int, list] = {}
            for recs in results:
                for rec in recs:
                    by_frame.setdefault(rec.frame_index, []).append(rec)
            for b in sorted(by_frame):
                rows.append(_aggregate(scheme, snr_db, b, by_frame[b]))
            if progress:
                progress(f"{scheme} @ {snr_db:g} dB done "
                         f"({time.perf_counter() - t0:.1f} s)")
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return rows


def _aggregate(scheme, snr_db, frame_index, records):
    def mean(attr):
        return float(np.mean([getattr(r, attr) for r in records]))

    def hw(attr):
        vals = np.array([getattr(r, attr) for r in records], dtype=float)
        if len(vals) < 2:
            return 0.0
        return float(1.96 * vals.std(ddof=1) / np.sqrt(len(vals)))

    return {
        "scheme": scheme,
        "snr_db": snr_db,
        "frame_index": frame_index,
        "trials": len(records),
        "idd_iters_used": mean("idd_iters_used"),
        "refine_iters_used": mean("refine_iters_used"),
        "nmse_direct": mean("nmse_direct"),
        "nmse_cascade": mean("nmse_cascade"),
        "ber": mean("ber"),
        "fer": mean("fer"),
        "spectral_efficiency": mean("spectral_efficiency"),
        "pilot_symbols_spent": mean("pilot_symbols_spent"),
        "nmse_direct_hw": hw("nmse_direct"),
        "nmse_cascade_hw": hw("nmse_cascade"),
        "ber_hw": hw("ber"),
        "fer_hw": hw("fer"),
    }


def format_float(x) -> str:
    return f"{float(x):.9g}"


def rows_to_csv(rows) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        cells = []
        for col in CSV_COLUMNS:
            v = row[col]
            if col == "scheme":
                cells.append(str(v))
            elif col in ("frame_index", "trials"):
                cells.append(str(int(v)))
            else:
                cells.append(format_float(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_results(rows, out_dir: str, config: SystemConfig,
                  wall_time: float | None = None) -> str:
    """Persist the CSV (deterministic bytes) plus a small runtime sidecar.

    Wall-clock timing deliberately stays out of the CSV so repeated runs of
    one (config, seed) pair are byte-identical.
    """
    csv_path = os.path.join(out_dir, "results.csv")
    write_atomic(csv_path, rows_to_csv(rows))
    meta = {"config_hash": config.config_hash(), "rows": len(rows)}
    if wall_time is not None:
        meta["wall_time_s"] = round(wall_time, 3)
    write_atomic(os.path.join(out_dir, "results.meta.json"),
                 json.dumps(meta, indent=2) + "\n")
    return csv_path


# -- calibration of the coarse estimator / refined residual --

def calibrate(config: SystemConfig, frames: int = 200, seed: int | None = None):
    """Monte Carlo table of coarse and refined cascaded NMSE per SNR point,
    used to drive the reuse decision. Returns a list of dicts."""
    seed = config.rng_seed if seed is None else seed
    code = build_ldpc(config.ldpc_block_len, config.ldpc_rate, config.ldpc_seed)
    gains = build_geometry(config)
    ref_gain_sq = gains.cascade_ref_gain_sq(config.elements_per_ris)
    table = []
    for snr_idx, snr_db in enumerate(config.snr_grid):
        es = snr_to_symbol_energy(snr_db, config.noise_power, ref_gain_sq)
        coarse_vals, refined_vals = [], []
        for trial in range(frames):
            rng = _rng_for(seed, COARSE, snr_idx, trial)
            channels = draw_channels(gains, config, rng)
            out_c = simulate_scheme_frame(COARSE, FIRST_STAGE, config, code,
                                          channels, es, rng)
            coarse_vals.append(out_c.nmse_cascade)
            rng = _rng_for(seed, PROPOSED, snr_idx, trial)
            channels = draw_channels(gains, config, rng)
            out_p = simulate_scheme_frame(PROPOSED, FIRST_STAGE, config, code,
                                          channels, es, rng)
            refined_vals.append(out_p.nmse_cascade)
        table.append({"snr_db": snr_db,
                      "nmse_coarse": float(np.mean(coarse_vals)),
                      "sigma_est_sq": float(np.mean(refined_vals))})
    return table


def write_calibration(table, out_dir: str, config: SystemConfig) -> str:
    lines = [f"config_hash = {config.config_hash()}",
             "snr_db nmse_coarse sigma_est_sq"]
    for row in table:
        lines.append(f"{format_float(row['snr_db'])} "
                     f"{format_float(row['nmse_coarse'])} "
                     f"{format_float(row['sigma_est_sq'])}")
    path = os.path.join(out_dir, f"calibration_{config.config_hash()}.txt")
    write_atomic(path, "\n".join(lines) + "\n")
    return path


def load_calibration(path: str):
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("config_hash"):
            raise ValueError("missing config hash header")
        cfg_hash = header.split("=")[1].strip()
        fh.readline()  # column names
        table = []
        for line in fh:
            snr, coarse, sest = line.split()
            table.append({"snr_db": float(snr), "nmse_coarse": float(coarse),
                          "sigma_est_sq": float(sest)})
    return cfg_hash, table
