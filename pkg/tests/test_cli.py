import json
import subprocess
import sys

import numpy as np
import pytest

from neural_ac import actor, cli, config
from neural_ac.experiments import BENCHMARKS, read_rows


def write_cfg(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw, indent=2))
    return path


def tiny_train(K=1, eval_every=1):
    return {
        "schema_version": 1,
        "problem": {"kind": "two_state", "gamma": 0.8, "reward_scale": 0.2},
        "critic": {"J": 1, "L": 8, "width": 8, "beta_scale": 16.0},
        "actor": {"width": 4},
        "train": {"K": K, "n": 16, "eval_every": eval_every, "seeds": [0]},
    }


def test_missing_config_is_usage_error(tmp_path, capsys):
    assert cli.main(["train", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["train"]) == 2
    assert cli.main(["frobnicate"]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_config_reports_line(tmp_path, capsys):
    raw = tiny_train()
    raw["critic"]["Jx"] = 1
    assert cli.main(["train", "--config", str(write_cfg(tmp_path, raw)), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "unknown key 'Jx'" in err and "cfg.json:" in err


def test_train_k1_writes_one_row_and_manifest(tmp_path):
    path = write_cfg(tmp_path, tiny_train())
    out = tmp_path / "run"
    assert cli.main(["train", "--config", str(path), "--out", str(out)]) == 0
    recs = actor.read_records_csv(out / "seed_0" / "records.csv")
    assert len(recs) == 1
    assert (out / "config.json").read_text() == path.read_text()
    man = json.loads((out / "manifest.json").read_text())
    assert man["config_sha256"] == config.config_hash((out / "config.json").read_text())
    assert man["command"] == "train" and man["seeds"] == [0]
    assert (out / "seed_0" / "checkpoints" / "policy_k0002").exists()
    # a populated output directory is refused
    assert cli.main(["train", "--config", str(path), "--out", str(out)]) == 2


def test_rows_follow_schedule_and_seed_override(tmp_path):
    path = write_cfg(tmp_path, tiny_train(K=5, eval_every=2))
    out = tmp_path / "run"
    assert cli.main(["train", "--config", str(path), "--out", str(out), "--seed", "3"]) == 0
    recs = actor.read_records_csv(out / "seed_3" / "records.csv")
    assert [r.k for r in recs] == [1, 3, 5]
    assert cli.main(["train", "--config", str(path), "--out", str(tmp_path / "x"), "--seed", "-1"]) == 2


def test_synthetic_sweep_slope(tmp_path, capsys):
    raw = {"schema_version": 1, "sweep": {"target": "synthetic", "values": [16, 64, 256, 1024, 4096],
                                          "exponent": -0.37, "constant": 2.0}}
    out = tmp_path / "sw"
    assert cli.main(["decompose", "--config", str(write_cfg(tmp_path, raw)), "--out", str(out)]) == 0
    fit = json.loads((out / "fit.json").read_text())
    assert abs(fit["slope"] + 0.37) <= 1e-10
    assert json.loads(capsys.readouterr().out)["slope"] == pytest.approx(-0.37, abs=1e-10)


def test_single_point_sweep_is_usage_error(tmp_path, capsys):
    raw = json.loads(json.dumps(BENCHMARKS["eps3"]))
    raw["sweep"]["values"] = [64]
    assert cli.main(["decompose", "--config", str(write_cfg(tmp_path, raw)), "--out", str(tmp_path / "o")]) == 2
    assert "insufficient points" in capsys.readouterr().err


def test_plot_empty_dir_and_single_row(tmp_path):
    (tmp_path / "empty").mkdir()
    assert cli.main(["plot", str(tmp_path / "empty")]) == 2
    assert cli.main(["plot", str(tmp_path / "missing")]) == 2
    out = tmp_path / "run"
    assert cli.main(["train", "--config", str(write_cfg(tmp_path, tiny_train())), "--out", str(out)]) == 0
    assert cli.main(["plot", str(out)]) == 0
    assert (out / "gap.svg").is_file()
    pts = read_rows(out / "gap_curve.csv")
    assert len(pts) == 1


def test_gap_windows_csv_matches_statistic(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["train", "--config", str(write_cfg(tmp_path, tiny_train(K=25))), "--out", str(out)]) == 0
    assert cli.main(["plot", str(out), "--out", str(tmp_path / "figs")]) == 0
    gaps = [r.gap for r in actor.read_records_csv(out / "seed_0" / "records.csv")]
    rows = read_rows(tmp_path / "figs" / "gap_windows.csv")
    np.testing.assert_array_equal([r["median_gap"] for r in rows], actor.windowed_medians(gaps, 20))


def test_mixing_command(tmp_path, capsys):
    out = tmp_path / "mix"
    assert cli.main(["mixing", "--config", str(write_cfg(tmp_path, BENCHMARKS["mixing"])), "--out", str(out)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert abs(rep["rho"] - 0.7) <= 0.05 and rep["fitted"]
    assert len(read_rows(out / "tv.csv")) == 30
    assert cli.main(["plot", str(out)]) == 0


def test_runtime_failure_exit_code(tmp_path):
    raw = {"schema_version": 1, "problem": {"kind": "chain", "kernel": [[0, 1], [1, 0]]}, "mixing": {}}
    assert cli.main(["mixing", "--config", str(write_cfg(tmp_path, raw)), "--out", str(tmp_path / "o")]) == 1


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "neural_ac.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "train" in res.stdout
    res = subprocess.run([sys.executable, "-m", "neural_ac.cli", "mixing", "--config", "nope.json"],
                         capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 2
