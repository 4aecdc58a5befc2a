import csv
import json

import pytest

from doim_otfs.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main

SMALL = ["--set", "m=8", "--set", "n=8", "--set", "min_frames=8", "--set", "min_bit_errors=0",
         "--set", "max_frames=8"]


@pytest.mark.parametrize("cmd", ["ber", "csi", "paths"])
def test_record_subcommands(cmd, tmp_path):
    out = tmp_path / f"{cmd}.csv"
    assert main([cmd, "--out", str(out), "--snr", "5,10", "--seed", "3", *SMALL]) == EXIT_OK
    rows = list(csv.DictReader(open(out, newline="")))
    n_groups = {"ber": 1, "csi": 3, "paths": 2}[cmd]
    assert len(rows) == 2 * n_groups
    assert {r["experiment"] for r in rows} == {cmd}
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["seed"] == 3 and side["config"]["snr_db"] == [5.0, 10.0]


def test_ber_plain_mode(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["ber", "--mode", "plain-otfs", "--out", str(out), "--snr", "10", *SMALL]) == 0
    row = next(csv.DictReader(open(out, newline="")))
    assert row["mode"] == "plain-otfs" and float(row["spectral_efficiency"]) == 2.0


def test_converge_with_trace(tmp_path):
    out = tmp_path / "c.csv"
    args = ["converge", "--out", str(out), "--snr", "10", "--trace", *SMALL,
            "--set", "converge_iter_max=4", "--set", "velocities=300"]
    assert main(args) == EXIT_OK
    assert len(out.read_text().splitlines()) == 1 + 4
    assert (tmp_path / "c.trace.tsv").exists()


def test_config_file_and_override_order(tmp_path):
    cfg = tmp_path / "x.cfg"
    cfg.write_text("m = 8\nn = 8\nseed = 1\n")
    out = tmp_path / "o.csv"
    assert main(["ber", "--config", str(cfg), "--seed", "9", "--out", str(out), "--snr", "10",
                 "--set", "max_frames=8", "--set", "min_frames=8"]) == 0
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["config"]["seed"] == 9 and side["config"]["m"] == 8


@pytest.mark.parametrize("extra", [["--set", "bogus=1"], ["--snr", "10,0"], ["--set", "rho=2"],
                                   ["--set", "noequals"], ["--workers", "0"]])
def test_config_errors_exit_2(extra, tmp_path, capsys):
    assert main(["ber", "--out", str(tmp_path / "o.csv"), *extra]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_config_file_exit_3(tmp_path):
    assert main(["ber", "--config", str(tmp_path / "nope.cfg"), "--out",
                 str(tmp_path / "o.csv")]) == EXIT_IO


def test_unwritable_output_exit_3(tmp_path):
    out = tmp_path / "missing_dir" / "o.csv"
    assert main(["ber", "--out", str(out), "--snr", "10", *SMALL]) == EXIT_IO


def test_out_is_required():
    with pytest.raises(SystemExit):
        main(["ber"])
