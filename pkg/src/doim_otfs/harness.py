"""Seeded Monte Carlo experiments over the full DoIM-OTFS link.

Every frame draws its randomness from ``SeedSequence([seed, point, trial])``
split into independent bit/channel/noise/CSI streams, and frames are
consumed in fixed-size chunks. Results therefore do not depend on the
number of worker processes.
"""

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import otfs_modem
from .channel_model import (apply, default_tap_count, discretize, max_doppler, perturb_csi,
                            sample_channel)
from .cmp_detector import DetectorConfig, decide, detect
from .config import ExperimentConfig
from .constellation import Constellation
from .effective_channel import build_H, prune
from .im_codec import FrameLayout, demap_frame, map_frame, spectral_efficiency

log = logging.getLogger(__name__)


def layout_of(cfg: ExperimentConfig) -> FrameLayout:
    return FrameLayout(cfg.m, cfg.n, cfg.m_hat, cfg.n_hat, cfg.k_hat, cfg.mc)


def frame_streams(seed: int, point: int, trial: int):
    """Independent (bits, channel, noise, csi) generators for one frame."""
    ss = np.random.SeedSequence([seed, point, trial])
    return [np.random.default_rng(s) for s in ss.spawn(4)]


@dataclass
class FrameOutcome:
    bits: int
    index_bits: int
    bit_errors: int
    index_bit_errors: int
    iterations: int
    ber_by_iteration: list | None = None
    eta_trace: list | None = None
    confidence_trace: list | None = None


def simulate_frame(cfg: ExperimentConfig, snr_db: float, point: int, trial: int,
                   eps: float = 0.0, n_paths: int | None = None, velocity_kmh: float | None = None,
                   n_iter_max: int | None = None, keep_history: bool = False) -> FrameOutcome:
    """Transmit, propagate and detect one frame; count bit errors."""
    rng_bits, rng_ch, rng_noise, rng_csi = frame_streams(cfg.seed, point, trial)
    layout = layout_of(cfg)
    const = Constellation.gray(cfg.mc)
    M, N, Ts = cfg.m, cfg.n, cfg.Ts
    plain = cfg.mode == "plain-otfs"

    if plain:
        bits = rng_bits.integers(0, 2, M * N * const.bits_per_symbol, dtype=np.uint8)
        X = otfs_modem.unvec(const.modulate(const.bits_to_labels(bits)), M, N)
        n_index = 0
    else:
        bits = rng_bits.integers(0, 2, layout.bits_per_frame, dtype=np.uint8)
        X, _ = map_frame(bits, layout, const)
        n_index = layout.p1 * layout.g

    tau_max = cfg.tau_max_samples * Ts
    P = default_tap_count(tau_max, Ts)
    v_max = max_doppler(cfg.carrier_freq, cfg.velocity_kmh if velocity_kmh is None else velocity_kmh)
    ch = sample_channel(cfg.n_paths if n_paths is None else n_paths, v_max, Ts, rng_ch, tau_max)
    noise_var = 10.0 ** (-snr_db / 10.0)

    taps = discretize(ch, M, N, cfg.delta_f, P, cfg.rolloff)
    r = apply(otfs_modem.modulate(X, P), taps, P, noise_var, cfg.rolloff, rng_noise)
    y = otfs_modem.vec(otfs_modem.demodulate(r, M, N))

    ch_rx = perturb_csi(ch, eps, rng_csi)
    H = prune(build_H(ch_rx, M, N, cfg.delta_f, cfg.rolloff, P), cfg.energy_keep)
    det_cfg = DetectorConfig(noise_var, cfg.damping, cfg.rho,
                             cfg.n_iter_max if n_iter_max is None else n_iter_max)
    res = detect(y, H, layout, const, det_cfg, with_null=not plain, keep_history=keep_history)

    def recover(labels, pattern):
        if plain:
            return const.labels_to_bits(otfs_modem.vec(labels))
        return demap_frame(labels, pattern, layout, const)

    errors = recover(res.labels, res.pattern) != bits
    n_bits = len(bits)
    index_err = int(errors.reshape(layout.g, layout.p)[:, : layout.p1].sum()) if not plain else 0
    out = FrameOutcome(n_bits, n_index, int(errors.sum()), index_err, res.iterations)
    if keep_history:
        per_iter = []
        for post in res.history:
            labels, pattern, _ = decide(post, layout, with_null=not plain)
            per_iter.append(int((recover(labels, pattern) != bits).sum()))
        out.ber_by_iteration = per_iter
        out.eta_trace = list(res.eta_trace)
        out.confidence_trace = [float(np.mean(p.max(axis=1))) for p in res.history]
    return out


@dataclass
class ResultRecord:
    experiment: str
    mode: str
    snr_db: float
    eps: float
    n_paths: int
    velocity_kmh: float
    n_hat: int
    k_hat: int
    spectral_efficiency: float
    ber: float
    index_ber: float
    symbol_ber: float
    fer: float
    mean_iterations: float
    frames: int
    bits: int
    bit_errors: int
    index_bit_errors: int
    symbol_bit_errors: int
    budget_met: bool
    config_digest: str
    seed: int
    wall_time_s: float = 0.0

    @property
    def ber_ci95(self):
        """Wilson 95% interval on the bit error rate."""
        return wilson_interval(self.bit_errors, self.bits)


CSV_FIELDS = [f.name for f in fields(ResultRecord) if f.name != "wall_time_s"]


def wilson_interval(k: int, n: int, z: float = 1.959963984540054):
    if n == 0:
        return 0.0, 1.0
    ph = k / n
    den = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * np.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def _frame_job(args):
    return simulate_frame(*args[:4], **args[4])


class Runner:
    """Maps frame jobs over an optional process pool, preserving order."""

    def __init__(self, workers: int = 1):
        self.workers = workers
        self._pool = ProcessPoolExecutor(workers) if workers > 1 else None

    def map(self, jobs):
        if self._pool is None:
            return [_frame_job(j) for j in jobs]
        return list(self._pool.map(_frame_job, jobs))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def run_point(cfg: ExperimentConfig, snr_db: float, point: int, runner: Runner,
              experiment: str = "ber", eps: float = 0.0, n_paths: int | None = None,
              velocity_kmh: float | None = None) -> ResultRecord:
    """Simulate one SNR point until the frame and error budgets are both met."""
    t0 = time.perf_counter()
    kw = {"eps": eps, "n_paths": n_paths, "velocity_kmh": velocity_kmh}
    bits = index_bits = errs = index_errs = frame_errs = iters = frames = 0
    while True:
        jobs = [(cfg, snr_db, point, frames + i, kw) for i in range(cfg.chunk_frames)]
        for o in runner.map(jobs):
            bits += o.bits
            index_bits += o.index_bits
            errs += o.bit_errors
            index_errs += o.index_bit_errors
            frame_errs += o.bit_errors > 0
            iters += o.iterations
        frames += len(jobs)
        met = frames >= cfg.min_frames and errs >= cfg.min_bit_errors
        if met or frames >= cfg.max_frames:
            break
    sym_bits = bits - index_bits
    layout = layout_of(cfg)
    plain = cfg.mode == "plain-otfs"
    rec = ResultRecord(
        experiment=experiment, mode=cfg.mode, snr_db=snr_db, eps=eps,
        n_paths=cfg.n_paths if n_paths is None else n_paths,
        velocity_kmh=cfg.velocity_kmh if velocity_kmh is None else velocity_kmh,
        n_hat=cfg.n_hat, k_hat=cfg.k_hat,
        spectral_efficiency=float(np.log2(cfg.mc)) if plain else spectral_efficiency(layout),
        ber=errs / bits, index_ber=index_errs / index_bits if index_bits else 0.0,
        symbol_ber=(errs - index_errs) / sym_bits, fer=frame_errs / frames,
        mean_iterations=iters / frames, frames=frames, bits=bits, bit_errors=errs,
        index_bit_errors=index_errs, symbol_bit_errors=errs - index_errs, budget_met=met,
        config_digest=cfg.digest(), seed=cfg.seed, wall_time_s=time.perf_counter() - t0)
    log.info("%s %s snr=%.1f dB eps=%g L=%s: ber=%.3e (%d errors / %d frames)", experiment,
             cfg.mode, snr_db, eps, rec.n_paths, rec.ber, errs, frames)
    return rec


def run_ber_sweep(cfg: ExperimentConfig, workers: int = 1) -> list:
    with Runner(workers) as runner:
        return [run_point(cfg, s, i, runner) for i, s in enumerate(cfg.snr_db)]


def run_csi_sweep(cfg: ExperimentConfig, eps_grid=None, workers: int = 1) -> list:
    """BER per (eps, SNR); the true channel drives the link, the perturbed one the detector.

    Frames at the same SNR index share seeds across eps values.
    """
    eps_grid = cfg.eps_grid if eps_grid is None else eps_grid
    with Runner(workers) as runner:
        return [run_point(cfg, s, i, runner, "csi", eps=float(e))
                for e in eps_grid for i, s in enumerate(cfg.snr_db)]


def run_paths_sweep(cfg: ExperimentConfig, paths=None, workers: int = 1) -> list:
    paths = cfg.paths_grid if paths is None else paths
    with Runner(workers) as runner:
        return [run_point(cfg, s, i, runner, "paths", n_paths=int(L))
                for L in paths for i, s in enumerate(cfg.snr_db)]


@dataclass
class ConvergenceStats:
    velocity_kmh: float
    snr_db: float
    frames: int
    bits: int
    mean_iterations: float
    iteration_histogram: dict
    mean_eta: list          # per iteration, stopped frames hold their final value
    ber: list               # BER if stopped after each iteration
    mean_confidence: list

    def plateau_iteration(self, rel_tol: float = 0.05) -> int:
        """First iteration after which the BER stays within ``rel_tol`` of its final value."""
        final = self.ber[-1]
        tol = rel_tol * final if final > 0 else 0.0
        it = len(self.ber)
        for i in range(len(self.ber) - 1, -1, -1):
            if abs(self.ber[i] - final) > tol:
                break
            it = i + 1
        return it


def run_convergence_stats(cfg: ExperimentConfig, snr_points=None, velocities=None, frames=None,
                          workers: int = 1, trace=None) -> list:
    """Per-iteration BER and eta traces at each (velocity, SNR).

    The detector runs up to ``cfg.converge_iter_max`` iterations. Frames at a
    given SNR share seeds across velocities.
    """
    snr_points = cfg.snr_db if snr_points is None else snr_points
    velocities = cfg.velocities if velocities is None else velocities
    frames = cfg.min_frames if frames is None else frames
    n_it = cfg.converge_iter_max
    out = []
    with Runner(workers) as runner:
        for v in velocities:
            for i, s in enumerate(snr_points):
                kw = {"velocity_kmh": v, "n_iter_max": n_it, "keep_history": True}
                outcomes = runner.map([(cfg, s, i, t, kw) for t in range(frames)])
                errs = np.zeros(n_it)
                eta = np.zeros(n_it)
                conf = np.zeros(n_it)
                hist = {}
                for t, o in enumerate(outcomes):
                    k = o.iterations
                    hist[k] = hist.get(k, 0) + 1
                    pad = n_it - k
                    errs += np.concatenate([o.ber_by_iteration, [o.ber_by_iteration[-1]] * pad])
                    eta += np.concatenate([o.eta_trace, [o.eta_trace[-1]] * pad])
                    conf += np.concatenate([o.confidence_trace, [o.confidence_trace[-1]] * pad])
                    if trace is not None:
                        for it in range(k):
                            trace.append((v, s, t, it + 1, o.eta_trace[it], o.confidence_trace[it]))
                n_bits = sum(o.bits for o in outcomes)
                out.append(ConvergenceStats(
                    velocity_kmh=float(v), snr_db=float(s), frames=frames, bits=n_bits,
                    mean_iterations=float(np.mean([o.iterations for o in outcomes])),
                    iteration_histogram=dict(sorted(hist.items())),
                    mean_eta=(eta / frames).tolist(), ber=(errs / n_bits).tolist(),
                    mean_confidence=(conf / frames).tolist()))
                log.info("converge v=%g snr=%g: mean iterations %.2f, final ber %.3e",
                         v, s, out[-1].mean_iterations, out[-1].ber[-1])
    return out


def emit_results(records: list, path, cfg: ExperimentConfig, extra: dict | None = None) -> Path:
    """Write records as CSV plus a JSON sidecar with the resolved config.

    Wall-clock timings go to the sidecar only, keeping the CSV reproducible.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\r\n")
        w.writeheader()
        for r in records:
            row = asdict(r)
            row.pop("wall_time_s")
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    side = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
        "snr_definition": "SNR = 1 / sigma_N^2 (unit-energy symbols, unit-energy receive filter)",
        "spectral_efficiency": {"doim": spectral_efficiency(layout_of(cfg)),
                                "plain-otfs": float(np.log2(cfg.mc))},
        "wall_time_s": [r.wall_time_s for r in records],
    }
    side.update(extra or {})
    sidecar = path.with_suffix(".json")
    with open(sidecar, "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
    return sidecar


def emit_convergence(stats: list, path, cfg: ExperimentConfig) -> Path:
    """Long-format CSV: one row per (velocity, snr, iteration)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["velocity_kmh", "snr_db", "iteration", "mean_eta", "ber",
                    "mean_confidence", "frames_stopped_here", "mean_iterations"])
        for st in stats:
            for it in range(len(st.ber)):
                w.writerow([repr(st.velocity_kmh), repr(st.snr_db), it + 1, repr(st.mean_eta[it]),
                            repr(st.ber[it]), repr(st.mean_confidence[it]),
                            st.iteration_histogram.get(it + 1, 0), repr(st.mean_iterations)])
    sidecar = path.with_suffix(".json")
    with open(sidecar, "w") as fh:
        json.dump({"config": cfg.to_dict(), "seed": cfg.seed, "config_digest": cfg.digest()},
                  fh, indent=2, sort_keys=True)
    return sidecar


def emit_trace(rows: list, path) -> None:
    with open(path, "w") as fh:
        fh.write("velocity_kmh\tsnr_db\ttrial\titeration\teta\tmean_max_posterior\n")
        for r in rows:
            fh.write("\t".join(repr(v) if isinstance(v, float) else str(v) for v in r) + "\n")
