"""Command-line interface: exit codes, outputs, end-to-end flow."""

import json

import numpy as np
import pytest

from hefl.cli import main
from hefl.errors import EXIT_CONFIG, EXIT_CRYPTO, EXIT_IO, EXIT_USAGE


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_help_shows_subcommands(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0
    for name in ("keygen", "train", "attack", "report", "bench"):
        assert name in out
    # fixed formatter width: no line wraps past 80 columns
    assert all(len(line) <= 80 for line in out.splitlines())


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "frobnicate")[0] == EXIT_USAGE
    assert run(capsys)[0] == EXIT_USAGE                  # command required
    assert run(capsys, "keygen")[0] == EXIT_USAGE        # --out required


def test_keygen_writes_deterministic_keys(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    code, out, _ = run(capsys, "keygen", "--out", str(a), "--seed", "42")
    assert code == 0 and "fingerprint" in out
    assert run(capsys, "keygen", "--out", str(b), "--seed", "42")[0] == 0
    assert (a / "secret.key").read_bytes() == (b / "secret.key").read_bytes()
    assert (a / "public.key").read_bytes() == (b / "public.key").read_bytes()
    c = tmp_path / "c"
    run(capsys, "keygen", "--out", str(c), "--seed", "43")
    assert (a / "secret.key").read_bytes() != (c / "secret.key").read_bytes()


def test_keygen_unknown_profile_exits_config(tmp_path, capsys):
    code, _, err = run(capsys, "keygen", "--out", str(tmp_path),
                       "--ckks-profile", "bogus")
    assert code == EXIT_USAGE or code == EXIT_CONFIG
    assert "bogus" in err


def test_bench_reports_all_operations(tmp_path, capsys):
    out_csv = tmp_path / "bench.csv"
    code, out, _ = run(capsys, "bench", "--repeats", "1",
                       "--out", str(out_csv))
    assert code == 0
    for op in ("encode", "encrypt", "he_add", "mul_rescale", "decrypt"):
        assert op in out
    lines = out_csv.read_bytes().split(b"\r\n")
    assert lines[0] == b"operation,median_ms" and len(lines) == 7


def test_bench_rejects_zero_repeats(capsys):
    code, _, err = run(capsys, "bench", "--repeats", "0")
    assert code == EXIT_USAGE and "repeats" in err


def test_attack_missing_capture_exits_io(tmp_path, capsys):
    code, _, err = run(capsys, "attack", "--capture",
                       str(tmp_path / "none.json"), "--out", str(tmp_path))
    assert code == EXIT_IO and "cannot read" in err


def test_train_bad_config_exits_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"encryption_ratio": 2.0}))
    code, _, err = run(capsys, "train", "--config", str(cfg),
                       "--out", str(tmp_path / "run"))
    assert code == EXIT_CONFIG and "encryption_ratio" in err


@pytest.mark.filterwarnings("ignore:all runs tie")
def test_full_flow_train_attack_report(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "clients": 2, "rounds": 1, "batch_size": 1, "local_epochs": 1,
        "train_size": 32, "test_size": 16, "single_step": True,
        "calibration_batches": 1, "checkpoint_every": 1,
    }))
    runs = []
    for ratio in ("0.0", "0.5"):
        out = tmp_path / f"run{ratio}"
        code, text, err = run(capsys, "train", "--config", str(cfg),
                              "--out", str(out), "--encryption-ratio", ratio)
        assert code == 0, err
        assert "test accuracy" in text
        assert (out / "records.jsonl").exists()
        assert (out / "capture_r1_c0.json").exists()
        runs.append(str(out))

    atk = tmp_path / "atk"
    code, text, err = run(capsys, "attack",
                          "--capture", runs[0] + "/capture_r1_c0.json",
                          "--out", str(atk),
                          "--iterations", "40", "--restarts", "1")
    assert code == 0, err
    result = json.loads((atk / "result.json").read_text())
    assert result["visible_count"] == result["visible_total"]
    assert (atk / "reconstruction.pgm").read_bytes().startswith(b"P5\n8 8\n")
    assert (atk / "target.pgm").exists()

    rep = tmp_path / "report"
    code, text, err = run(capsys, "report", "--runs", *runs,
                          "--out", str(rep))
    assert code == 0, err
    for name in ("radar.csv", "per_round.csv", "gap.csv", "summary.json"):
        assert (rep / name).exists()
    radar = (rep / "radar.csv").read_text().splitlines()
    assert radar[1].startswith("0.000000,") and radar[2].startswith("0.500000,")


def test_report_missing_run_exits_config(tmp_path, capsys):
    code, _, err = run(capsys, "report", "--runs", str(tmp_path / "ghost"),
                       "--out", str(tmp_path / "rep"))
    assert code == EXIT_CONFIG and "unreadable" in err
    assert not (tmp_path / "rep").exists()
