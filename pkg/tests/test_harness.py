import csv

import numpy as np
import pytest

from doim_otfs.config import ExperimentConfig
from doim_otfs.harness import (CSV_FIELDS, Runner, emit_convergence, emit_results, emit_trace,
                               frame_streams, run_ber_sweep, run_convergence_stats, run_csi_sweep,
                               run_paths_sweep, run_point, simulate_frame, wilson_interval)

SMALL = ExperimentConfig(m=8, n=8, min_frames=16, min_bit_errors=0, max_frames=64, chunk_frames=8,
                         snr_db=(10.0,))


def test_frame_streams_independent():
    a = [g.integers(0, 2**32, 4) for g in frame_streams(0, 0, 0)]
    b = [g.integers(0, 2**32, 4) for g in frame_streams(0, 0, 1)]
    assert not any(np.array_equal(x, y) for x in a for y in a if x is not y)
    assert not np.array_equal(a[0], b[0])
    again = [g.integers(0, 2**32, 4) for g in frame_streams(0, 0, 0)]
    assert all(np.array_equal(x, y) for x, y in zip(a, again))


@pytest.mark.parametrize("mode", ["doim", "plain-otfs"])
def test_noiseless_small_config_is_error_free(mode):
    # a few ill-conditioned draws need more than ten iterations to settle
    cfg = SMALL.replace(mode=mode, n_iter_max=30)
    for t in range(1000):
        assert simulate_frame(cfg, 60.0, 0, t).bit_errors == 0


def test_bit_accounting_per_frame():
    cfg = SMALL
    for t in range(20):
        o = simulate_frame(cfg, 0.0, 0, t)
        assert o.bits == 8 * 8 // 16 * 10 and o.index_bits == 4 * 2
        assert 0 <= o.index_bit_errors <= o.bit_errors <= o.bits


def test_record_accounting_and_budget():
    cfg = SMALL.replace(min_frames=16, min_bit_errors=30, max_frames=400)
    with Runner() as r:
        rec = run_point(cfg, 4.0, 0, r)
    assert rec.index_bit_errors + rec.symbol_bit_errors == rec.bit_errors
    assert rec.ber == pytest.approx(rec.bit_errors / rec.bits)
    assert rec.budget_met and rec.frames >= 16 and rec.bit_errors >= 30
    assert rec.frames % cfg.chunk_frames == 0
    lo, hi = rec.ber_ci95
    assert lo <= rec.ber <= hi


def test_budget_cap_reported():
    cfg = SMALL.replace(min_frames=8, min_bit_errors=10**6, max_frames=16)
    with Runner() as r:
        rec = run_point(cfg, 10.0, 0, r)
    assert rec.frames == 16 and not rec.budget_met


def test_wilson_interval():
    assert wilson_interval(0, 0) == (0.0, 1.0)
    lo, hi = wilson_interval(10, 100)
    assert lo < 0.1 < hi
    assert lo == pytest.approx(0.0552, abs=1e-3) and hi == pytest.approx(0.1744, abs=1e-3)


def test_ber_improves_with_snr():
    cfg = ExperimentConfig(m=32, n=16, snr_db=(0.0, 10.0), min_frames=8, min_bit_errors=0,
                           max_frames=8)
    recs = run_ber_sweep(cfg)
    assert recs[1].ber < recs[0].ber


def test_plain_mode_matches_flat_rayleigh_ber():
    # one on-grid path without Doppler is a flat Rayleigh channel per frame
    cfg = ExperimentConfig(m=8, n=8, mode="plain-otfs", n_paths=1, velocity_kmh=0.0)
    snr_db = 10.0
    errs = bits = 0
    for t in range(2000):
        o = simulate_frame(cfg, snr_db, 0, t)
        errs += o.bit_errors
        bits += o.bits
    gb = 10 ** (snr_db / 10) / 2
    expected = 0.5 * (1 - np.sqrt(gb / (1 + gb)))
    assert errs / bits == pytest.approx(expected, rel=0.1)


def test_csi_zero_eps_matches_perfect_csi():
    cfg = SMALL.replace(eps_grid=(0.0,))
    perfect = run_ber_sweep(cfg)
    csi = run_csi_sweep(cfg)
    for a, b in zip(perfect, csi):
        assert (a.bit_errors, a.bits, a.frames) == (b.bit_errors, b.bits, b.frames)


def test_paths_sweep_labels():
    recs = run_paths_sweep(SMALL, paths=(1, 3))
    assert [r.n_paths for r in recs] == [1, 3]
    assert all(r.experiment == "paths" for r in recs)


def test_emit_results_csv(tmp_path):
    recs = run_ber_sweep(SMALL.replace(snr_db=(5.0, 10.0)))
    side = emit_results(recs, tmp_path / "out.csv", SMALL)
    raw = (tmp_path / "out.csv").read_bytes()
    assert raw.count(b"\r\n") == 3
    rows = list(csv.DictReader(open(tmp_path / "out.csv", newline="")))
    assert list(rows[0]) == CSV_FIELDS and "wall_time_s" not in rows[0]
    assert float(rows[1]["ber"]) == recs[1].ber
    assert side.exists()


def test_convergence_stats_and_trace(tmp_path):
    cfg = SMALL.replace(converge_iter_max=6)
    rows = []
    stats = run_convergence_stats(cfg, snr_points=(10.0,), velocities=(300.0, 1000.0), frames=4,
                                  trace=rows)
    assert len(stats) == 2
    st = stats[0]
    assert len(st.ber) == len(st.mean_eta) == 6
    assert sum(st.iteration_histogram.values()) == 4
    assert 1 <= st.mean_iterations <= 6
    assert 1 <= st.plateau_iteration() <= 6
    assert len(rows) == sum(k * v for s in stats for k, v in s.iteration_histogram.items())
    emit_convergence(stats, tmp_path / "c.csv", cfg)
    emit_trace(rows, tmp_path / "c.trace.tsv")
    assert len((tmp_path / "c.csv").read_text().splitlines()) == 1 + 2 * 6
    assert (tmp_path / "c.trace.tsv").read_text().startswith("velocity_kmh\tsnr_db")
