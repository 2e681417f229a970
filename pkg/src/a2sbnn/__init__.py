"""Copula-initialized spatial neural network calibrated with Wasserstein,
moment and correlation losses."""

from .calibration import CalibrationConfig, CriticParams, LossBreakdown, calibrate, init_critic, run_calibration
from .copula import A2Params, init_bias, init_weights, inv_generator
from .experiment import ExperimentConfig, MetricsReport, run_sweep
from .field import FieldConfig, SpatialGrid, TargetField, make_grid, se_covariance, synthesize_target
from .kernels import BACKEND
from .model import EmbeddingConfig, ModelParams, embed, forward, init_model, predict, predict_ensemble
from .stats import RngStream, cholesky, histogram, inv_normal_cdf, pearson, rmse, sample_student_t, wasserstein1_exact
from .swilk import shapiro_wilk

__version__ = "0.1.0"
