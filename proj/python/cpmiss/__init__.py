"""Conformal prediction intervals with missing covariates."""

from ._core import (
    ConfigError,
    DataError,
    Error,
    Pipeline,
    conformal_quantile,
    example1_conditional_variance,
    fit_pipeline,
    heom_distance,
    predict_intervals,
    run_experiment,
    weighted_quantile,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "Pipeline",
    "conformal_quantile",
    "example1_conditional_variance",
    "fit_pipeline",
    "heom_distance",
    "predict_intervals",
    "run_experiment",
    "weighted_quantile",
]
