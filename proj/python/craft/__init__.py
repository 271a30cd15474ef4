"""Python access to the CRAFT forecaster: synthetic worlds, training and metrics."""

from ._craft import (
    ConfigError,
    DataError,
    Model,
    NumericError,
    World,
    baseline_dlinear,
    decompose,
    demand_loss,
    early_to_cumulative,
    generate_world,
    iwr,
    load_checkpoint,
    load_world,
    moving_avg_trend,
    pearson,
    phdi,
    ridge_solve,
    train,
    wmape,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Model",
    "NumericError",
    "World",
    "baseline_dlinear",
    "decompose",
    "demand_loss",
    "early_to_cumulative",
    "generate_world",
    "iwr",
    "load_checkpoint",
    "load_world",
    "moving_avg_trend",
    "pearson",
    "phdi",
    "ridge_solve",
    "train",
    "wmape",
]
