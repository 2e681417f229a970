"""Theta-sweep experiment: calibrate one network per (theta, seed) against a
per-seed fixed target field and write metrics, fields, residuals and plots."""

from __future__ import annotations

import copy
import csv
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from dataclasses import field as dc_field
from pathlib import Path

import jsonschema
import numpy as np

from .calibration import CalibrationConfig, LossBreakdown, init_critic, run_calibration, write_trajectory_csv
from .errors import ConfigError, DomainError
from .field import FieldConfig, TargetField, make_grid, synthesize_target, write_field_csv
from .model import EmbeddingConfig, init_model, predict
from .plots import heatmap_pair_svg, histogram_svg
from .stats import RngStream, pearson, rmse
from .swilk import shapiro_wilk

log = logging.getLogger(__name__)

DEFAULT_THETAS = (1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)
SHAPIRO_STREAM = 41

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_POSINT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "a2sbnn experiment config",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "theta_grid": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 1}},
        "seeds": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
        "grid_size": {"type": "integer", "minimum": 2},
        "field": {
            "type": "object", "additionalProperties": False,
            "properties": {"kernel_variance": _POS, "length_scale": _POS, "t_dof": _POS,
                           "noise_scale": _NONNEG, "jitter": _NONNEG},
        },
        "embedding": {
            "type": "object", "additionalProperties": False,
            "properties": {"centers_per_side": {"type": "integer", "minimum": 1}, "tau": _POS,
                           "hidden_width": _POSINT},
        },
        "calibration": {
            "type": "object", "additionalProperties": False,
            "properties": {"lambda_w": _NONNEG, "lambda_moment": _NONNEG, "lambda_corr": _NONNEG,
                           "gp_coefficient": _NONNEG, "critic_steps_per_update": _POSINT,
                           "learning_rate": _POS, "critic_learning_rate": _POS,
                           "iterations": _POSINT, "batch_size": {"type": "integer", "minimum": 2},
                           "eval_every": {"type": "integer", "minimum": 0},
                           "match_variance": {"type": "boolean"}},
        },
        "output_dir": {"type": "string", "minLength": 1},
        "emit_plots": {"type": "boolean"},
        "shapiro_sample": {"type": "integer", "minimum": 3, "maximum": 5000},
        "shapiro_full_grid": {"type": "boolean"},
        "workers": _POSINT,
    },
}


@dataclass
class ExperimentConfig:
    theta_grid: list = dc_field(default_factory=lambda: list(DEFAULT_THETAS))
    seeds: list = dc_field(default_factory=lambda: [0, 1, 2])
    grid_size: int = 32
    field: FieldConfig = dc_field(default_factory=FieldConfig)
    centers_per_side: int = 8
    tau: float = 0.3
    hidden_width: int = 64
    calibration: CalibrationConfig = dc_field(default_factory=CalibrationConfig)
    output_dir: str = "results"
    emit_plots: bool = True
    shapiro_sample: int = 500
    shapiro_full_grid: bool = False
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if not self.theta_grid:
            raise ConfigError("theta_grid must be non-empty")
        if any(not float(t) >= 1.0 for t in self.theta_grid):
            raise ConfigError("every theta must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be >= 2")
        n = self.grid_size**2
        if self.calibration.batch_size > n:
            raise ConfigError(f"batch_size {self.calibration.batch_size} exceeds grid size {n}")
        if not 3 <= self.shapiro_sample <= 5000:
            raise ConfigError("shapiro_sample must lie in [3, 5000]")
        if self.shapiro_full_grid and n > 5000:
            raise ConfigError("full-grid Shapiro-Wilk needs at most 5000 points")
        return self

    def embedding(self) -> EmbeddingConfig:
        return EmbeddingConfig.regular(self.centers_per_side, self.tau)

    def to_dict(self) -> dict:
        f = asdict(self.field)
        f.pop("seed")
        c = asdict(self.calibration)
        c.pop("seed")
        return {
            "theta_grid": [float(t) for t in self.theta_grid], "seeds": [int(s) for s in self.seeds],
            "grid_size": self.grid_size, "field": f,
            "embedding": {"centers_per_side": self.centers_per_side, "tau": self.tau,
                          "hidden_width": self.hidden_width},
            "calibration": c, "output_dir": self.output_dir, "emit_plots": self.emit_plots,
            "shapiro_sample": self.shapiro_sample, "shapiro_full_grid": self.shapiro_full_grid,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(d, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{path}: {exc.message}") from None
        d = copy.deepcopy(d)
        kw = {k: d[k] for k in ("theta_grid", "seeds", "grid_size", "output_dir", "emit_plots",
                                "shapiro_sample", "shapiro_full_grid", "workers") if k in d}
        emb = d.get("embedding", {})
        kw.update({k: emb[k] for k in ("centers_per_side", "tau", "hidden_width") if k in emb})
        try:
            kw["field"] = FieldConfig(**d.get("field", {}))
            kw["calibration"] = CalibrationConfig(**d.get("calibration", {}))
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        return cls(**kw).validate()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(d)


@dataclass
class MetricsReport:
    theta: float
    seed: int
    correlation: float
    rmse: float
    shapiro_W: float
    shapiro_p: float
    runtime_seconds: float
    final: LossBreakdown


@dataclass
class CellResult:
    report: MetricsReport
    prediction: np.ndarray
    residuals: np.ndarray
    shapiro_index: np.ndarray
    trajectory: list


@dataclass
class SweepResult:
    config: ExperimentConfig
    reports: list
    targets: dict  # seed -> TargetField
    cells: dict    # (theta, seed) -> CellResult


def shapiro_indices(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    n = cfg.grid_size**2
    if cfg.shapiro_full_grid:
        return np.arange(n)
    return np.sort(RngStream(seed, SHAPIRO_STREAM).choice(n, min(cfg.shapiro_sample, n)))


def run_cell(theta: float, seed: int, target: TargetField, cfg: ExperimentConfig) -> CellResult:
    t0 = time.perf_counter()
    emb = cfg.embedding()
    model = init_model(theta, seed, emb, cfg.hidden_width)
    critic = init_critic(theta, seed)
    calib = replace(cfg.calibration, seed=seed)
    model, _, trajectory = run_calibration(target, model, critic, calib)
    pred = predict(target.grid.coords, model)
    resid = pred - target.values
    idx = shapiro_indices(cfg, seed)
    w, p = shapiro_wilk(resid[idx])
    report = MetricsReport(
        theta=float(theta), seed=int(seed),
        correlation=pearson(pred, target.values), rmse=rmse(pred, target.values),
        shapiro_W=w, shapiro_p=p, runtime_seconds=time.perf_counter() - t0,
        final=trajectory[-1],
    )
    log.info("theta=%g seed=%d corr=%.4f rmse=%.4f sw_p=%.4f (%.1fs)", theta, seed,
             report.correlation, report.rmse, p, report.runtime_seconds)
    return CellResult(report, pred, resid, idx, trajectory)


def _cell_job(args):
    return run_cell(*args)


def _check_writable(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc


def run_sweep(cfg: ExperimentConfig, write: bool = True) -> SweepResult:
    """Calibrate every (theta, seed) cell; the target is synthesized once per seed."""
    cfg.validate()
    out = Path(cfg.output_dir)
    if write:
        _check_writable(out)
    grid = make_grid(cfg.grid_size)
    targets = {s: synthesize_target(grid, replace(cfg.field, seed=s)) for s in cfg.seeds}
    jobs = [(float(t), int(s), targets[s], cfg) for t in cfg.theta_grid for s in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]
    cells = {(j[0], j[1]): r for j, r in zip(jobs, results)}
    result = SweepResult(cfg, [r.report for r in results], targets, cells)
    if write:
        write_report(result, out)
        if cfg.emit_plots:
            render_plots(result, out)
    return result


# ---- reporting --------------------------------------------------------------------------

METRICS_COLUMNS = ("theta", "seed", "correlation", "rmse", "shapiro_W", "shapiro_p",
                   "final_iteration", "final_l_sup", "final_l_w", "final_l_moment",
                   "final_l_corr", "final_l_total")


def _g(v) -> str:
    return format(float(v), ".17g")


def theta_tag(theta: float) -> str:
    return repr(float(theta))


def metrics_rows(reports):
    for r in reports:
        f = r.final
        yield [_g(r.theta), str(r.seed), _g(r.correlation), _g(r.rmse), _g(r.shapiro_W),
               _g(r.shapiro_p), str(f.iteration), _g(f.l_sup), _g(f.l_w), _g(f.l_moment),
               _g(f.l_corr), _g(f.l_total)]


def summarize(reports) -> list:
    """Per-theta aggregates over seeds: mean/std/median of correlation, RMSE and SW p."""
    by_theta = {}
    for r in reports:
        by_theta.setdefault(r.theta, []).append(r)
    rows = []
    for theta in sorted(by_theta):
        rs = by_theta[theta]
        row = {"theta": theta, "n_seeds": len(rs)}
        for key in ("correlation", "rmse", "shapiro_p"):
            vals = [getattr(r, key) for r in rs]
            row[f"{key}_mean"] = statistics.fmean(vals)
            row[f"{key}_std"] = statistics.stdev(vals) if len(vals) > 1 else 0.0
            row[f"{key}_median"] = statistics.median(vals)
        row["shapiro_pass"] = sum(r.shapiro_p > 0.05 for r in rs)
        rows.append(row)
    return rows


def format_summary(reports) -> str:
    rows = summarize(reports)
    multi = any(r["n_seeds"] > 1 for r in rows)
    if multi:
        head = f"{'theta':>6}  {'Correlation':>17}  {'RMSE':>17}  {'SW p (median)':>13}  {'p>0.05':>6}"
    else:
        head = f"{'theta':>6}  {'Correlation':>11}  {'RMSE':>8}  {'SW p-value':>10}"
    lines = [head, "-" * len(head)]
    for r in rows:
        if multi:
            lines.append(f"{r['theta']:>6.1f}  {r['correlation_mean']:>8.4f} ± {r['correlation_std']:<6.4f}  "
                         f"{r['rmse_mean']:>8.4f} ± {r['rmse_std']:<6.4f}  {r['shapiro_p_median']:>13.4f}  "
                         f"{r['shapiro_pass']:>3d}/{r['n_seeds']:<2d}")
        else:
            lines.append(f"{r['theta']:>6.1f}  {r['correlation_mean']:>11.4f}  {r['rmse_mean']:>8.4f}  "
                         f"{r['shapiro_p_mean']:>10.4f}")
    return "\n".join(lines)


def write_report(result: SweepResult, out) -> None:
    if not result.reports:
        raise DomainError("no reports to write")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    side = result.config.grid_size

    def _open(name):
        try:
            return open(out / name, "w", newline="", encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {out / name}: {exc}") from exc

    with _open("metrics.csv") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_COLUMNS)
        w.writerows(metrics_rows(result.reports))
    with _open("runtime.csv") as fh:
        w = csv.writer(fh)
        w.writerow(("theta", "seed", "runtime_seconds"))
        for r in result.reports:
            w.writerow([_g(r.theta), r.seed, f"{r.runtime_seconds:.3f}"])
    summary = summarize(result.reports)
    with _open("summary.csv") as fh:
        w = csv.DictWriter(fh, fieldnames=list(summary[0]))
        w.writeheader()
        for row in summary:
            w.writerow({k: (_g(v) if isinstance(v, float) else v) for k, v in row.items()})
    with _open("config.json") as fh:
        json.dump(result.config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for seed, target in result.targets.items():
        write_field_csv(out / f"field_target_seed_{seed}.csv", target.values, side)
    coords = next(iter(result.targets.values())).grid.coords
    for (theta, seed), cell in result.cells.items():
        tag = f"theta_{theta_tag(theta)}_seed_{seed}"
        write_field_csv(out / f"field_pred_{tag}.csv", cell.prediction, side)
        in_sample = np.zeros(cell.residuals.size, dtype=bool)
        in_sample[cell.shapiro_index] = True
        with _open(f"residuals_{tag}.csv") as fh:
            w = csv.writer(fh)
            w.writerow(("point", "x", "y", "residual", "in_shapiro_sample"))
            for k, (xy, r, s) in enumerate(zip(coords, cell.residuals, in_sample)):
                w.writerow([k, _g(xy[0]), _g(xy[1]), _g(r), int(s)])
        write_trajectory_csv(out / f"trajectory_{tag}.csv", cell.trajectory)
    print(format_summary(result.reports))


def render_plots(result: SweepResult, out) -> list:
    """Two SVGs per (theta, seed): target-vs-prediction heatmap and residual histogram."""
    out = Path(out)
    side = result.config.grid_size
    written = []
    for (theta, seed), cell in result.cells.items():
        tag = f"theta_{theta_tag(theta)}_seed_{seed}"
        target = result.targets[seed]
        svg, _ = heatmap_pair_svg(target.as_image(), cell.prediction.reshape(side, side),
                                  title=f"theta = {theta:g}, seed {seed}")
        p = out / f"heatmap_{tag}.svg"
        p.write_text(svg, encoding="utf-8")
        written.append(p)
        svg, _ = histogram_svg(cell.residuals, 30, title=f"Residuals, theta = {theta:g}, seed {seed}")
        p = out / f"residual_hist_{tag}.svg"
        p.write_text(svg, encoding="utf-8")
        written.append(p)
    return written
