import json
import subprocess
import sys

import pytest

from a2sbnn import cli
from a2sbnn.errors import NumericError

FAST = ["--grid-size", "8", "--iterations", "3", "--seed", "0", "--no-plots"]


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"embedding": {"centers_per_side": 3, "hidden_width": 8},
                             "calibration": {"batch_size": 16, "eval_every": 0}}))
    return p


def test_run_single_theta(tmp_path, small_config, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(small_config), "--theta", "3", "--out", str(out)] + FAST) == 0
    assert (out / "metrics.csv").read_text().count("\n") == 2
    assert "theta" in capsys.readouterr().out
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["theta_grid"] == [3.0] and cfg["calibration"]["iterations"] == 3


def test_theta_grid_flag(tmp_path, small_config):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(small_config), "--theta-grid", "2,4", "--out", str(out)] + FAST) == 0
    assert (out / "field_pred_theta_4.0_seed_0.csv").exists()


def test_validate(small_config, capsys):
    assert cli.main(["validate", "--config", str(small_config)]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_bad(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"theta_grid": []}))
    assert cli.main(["validate", "--config", str(p)]) == 1
    assert "theta_grid" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert cli.main(["validate", "--config", str(tmp_path / "nope.json")]) == 1


def test_bad_override(tmp_path):
    assert cli.main(["run", "--theta", "0.5", "--out", str(tmp_path)]) == 1
    assert cli.main(["run", "--iterations", "0", "--out", str(tmp_path)]) == 1


def test_unwritable_output(tmp_path, small_config):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert cli.main(["run", "--config", str(small_config), "--out", str(blocker / "x")] + FAST) == 1


def test_numeric_failure_exit_code(monkeypatch, tmp_path):
    def boom(cfg):
        raise NumericError("non-finite calibration loss at iteration 7")
    monkeypatch.setattr(cli, "run_sweep", boom)
    assert cli.main(["run", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path, small_config):
    proc = subprocess.run([sys.executable, "-m", "a2sbnn", "validate", "--config", str(small_config)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
