"""Latent factor models for high-dimensional time series via eigenanalysis of lagged autocovariances."""

__version__ = "0.1.0"

from .covariance import (
    CovarianceEstimates,
    NoiseModel,
    assemble_sigma_y,
    estimate_covariance,
    estimate_noise_variances,
    infer_grouping,
    precision_woodbury,
)
from .eigen import FactorModelFit, estimate_loadings, fit, select_num_factors
from .forecasting import ForecastReport, RollingConfig, ar_fit_forecast, rolling_forecast
from .moments import LMatrix, autocovariances, build_L, sample_autocov
from .panel import TimeSeriesPanel, difference, load_csv, vectorize_grid, write_csv
from .simulation import (
    Example1Config,
    Example2Config,
    SimulationReport,
    gen_example1,
    gen_example2,
    run_replications,
    spectral_norm,
)
from .twostep import TwoStepFit, factor_strength_ratio, two_step_fit
