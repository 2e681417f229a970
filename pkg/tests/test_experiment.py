import csv
import json
import re

import numpy as np
import pytest

from a2sbnn.calibration import CalibrationConfig, LossBreakdown
from a2sbnn.errors import ConfigError
from a2sbnn.experiment import (ExperimentConfig, MetricsReport, format_summary, run_sweep, summarize,
                               theta_tag)
from a2sbnn.field import read_field_csv
from a2sbnn.plots import heatmap_pair_svg, histogram_svg
from a2sbnn.stats import pearson, rmse

THETAS = [1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]


def tiny(out, **kw):
    base = dict(theta_grid=[2.0, 5.0], seeds=[0], grid_size=8, centers_per_side=3, hidden_width=8,
                calibration=CalibrationConfig(iterations=5, batch_size=16, eval_every=0),
                output_dir=str(out), emit_plots=False)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def ten_theta(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    cfg = tiny(out, theta_grid=THETAS, emit_plots=True)
    return out, run_sweep(cfg)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_empty_theta_grid(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(theta_grid=[]).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"theta_grid": []})

    def test_theta_below_one(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(theta_grid=[0.5]).validate()

    def test_empty_seeds(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(seeds=[]).validate()

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"thetas": [2.0]})

    def test_bad_nested_value(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"calibration": {"iterations": 0}})

    def test_roundtrip(self):
        cfg = ExperimentConfig(theta_grid=[2.0, 3.5], seeds=[4], grid_size=16)
        back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert back.to_dict() == cfg.to_dict()

    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.theta_grid == THETAS and cfg.seeds == [0, 1, 2] and cfg.grid_size == 32
        assert cfg.embedding().K == 64


class TestSweep:
    def test_row_count(self, ten_theta):
        out, result = ten_theta
        rows = read_rows(out / "metrics.csv")
        assert len(rows) == 10
        assert [float(r["theta"]) for r in rows] == THETAS

    def test_metric_ranges(self, ten_theta):
        for r in ten_theta[1].reports:
            assert -1 <= r.correlation <= 1 and r.rmse >= 0 and 0 <= r.shapiro_p <= 1

    def test_target_shared_across_theta(self, ten_theta):
        out, result = ten_theta
        target = read_field_csv(out / "field_target_seed_0.csv").ravel()
        for (theta, seed), cell in result.cells.items():
            # residual = pred - target, so this recovers the target up to one rounding
            assert np.max(np.abs(cell.prediction - cell.residuals - target)) <= 1e-15

    def test_self_consistent(self, ten_theta):
        out, _ = ten_theta
        target = read_field_csv(out / "field_target_seed_0.csv").ravel()
        for row in read_rows(out / "metrics.csv"):
            pred = read_field_csv(out / f"field_pred_theta_{theta_tag(float(row['theta']))}_seed_0.csv").ravel()
            assert abs(pearson(pred, target) - float(row["correlation"])) <= 1e-12
            assert abs(rmse(pred, target) - float(row["rmse"])) <= 1e-12

    def test_twenty_svgs(self, ten_theta):
        out, _ = ten_theta
        svgs = sorted(out.glob("*.svg"))
        assert len(svgs) == 20
        assert all(p.read_text().startswith("<svg") for p in svgs)

    def test_residual_file(self, ten_theta):
        out, result = ten_theta
        rows = read_rows(out / "residuals_theta_2.0_seed_0.csv")
        assert len(rows) == 64
        assert sum(int(r["in_shapiro_sample"]) for r in rows) == 64  # sample capped at grid size
        cell = result.cells[(2.0, 0)]
        assert np.array_equal([float(r["residual"]) for r in rows], cell.residuals)

    def test_floats_have_17_digits(self, ten_theta):
        text = (ten_theta[0] / "metrics.csv").read_text()
        row = text.splitlines()[1].split(",")
        assert float(row[2]) == ten_theta[1].reports[0].correlation

    def test_byte_identical_rerun(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_sweep(tiny(a))
        run_sweep(tiny(b))
        for name in ("metrics.csv", "summary.csv", "field_pred_theta_5.0_seed_0.csv",
                     "residuals_theta_2.0_seed_0.csv", "trajectory_theta_2.0_seed_0.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_sweep(tiny(a))
        run_sweep(tiny(b, workers=2))
        assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError):
            run_sweep(tiny(blocker / "sub"))

    def test_no_write(self, tmp_path):
        res = run_sweep(tiny(tmp_path / "never"), write=False)
        assert len(res.reports) == 2
        assert not (tmp_path / "never").exists()


def _report(theta, seed, corr, r, p):
    return MetricsReport(theta, seed, corr, r, 0.99, p, 1.0, LossBreakdown(0, 0, 0, 0, 0, 0))


def test_summary_three_seeds():
    reps = [_report(2.0, s, c, r, p) for s, (c, r, p) in enumerate([(0.9, 0.1, 0.2), (0.8, 0.2, 0.01),
                                                                      (0.7, 0.3, 0.5)])]
    (row,) = summarize(reps)
    assert row["correlation_mean"] == pytest.approx(0.8, abs=1e-15)
    assert row["correlation_std"] == pytest.approx(0.1, abs=1e-15)
    assert row["rmse_median"] == 0.2
    assert row["shapiro_pass"] == 2
    text = format_summary(reps)
    assert "0.8000 ± 0.1000" in text and "2/3" in text


def test_heatmap_shared_scale():
    a = np.zeros((4, 4))
    b = np.full((4, 4), 3.0)
    svg, (lo, hi) = heatmap_pair_svg(a, b)
    assert (lo, hi) == (0.0, 3.0)
    assert len(re.findall(r'<rect x="[^"]+" y="[^"]+" width="8" height="8"', svg)) == 32


def test_histogram_conserves():
    x = np.random.default_rng(0).normal(size=1024)
    svg, counts = histogram_svg(x, 30)
    assert counts.sum() == 1024 and len(counts) == 30
