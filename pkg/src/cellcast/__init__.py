"""Cell-level KPI forecasting with a dense-MLP regressor."""

from .baselines import RuleParams, exp_smooth, naive_forecast, rule_based_forecast, rule_based_week
from .evaluate import EvalReport, ForecastGrid, evaluate_run, read_grid, weighted_mape
from .ingest import CellSeries, HolidayCalendar, Indicator, Tech, parse_holidays, parse_series_csv
from .kernels import BACKEND
from .model import (
    DenseMlpModel,
    LossReport,
    TrainConfig,
    adam_step,
    backward,
    forward,
    load_model,
    loss,
    lr_at_epoch,
    predict,
    save_model,
    train,
)
from .preprocess import SampleRow, extract_windows, holiday_vector, impute, scale_row, unscale
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CellSeries",
    "DenseMlpModel",
    "EvalReport",
    "ForecastGrid",
    "HolidayCalendar",
    "Indicator",
    "LossReport",
    "RuleParams",
    "SampleRow",
    "SynthConfig",
    "Tech",
    "TrainConfig",
    "adam_step",
    "backward",
    "evaluate_run",
    "exp_smooth",
    "extract_windows",
    "forward",
    "generate",
    "holiday_vector",
    "impute",
    "load_model",
    "loss",
    "lr_at_epoch",
    "naive_forecast",
    "parse_holidays",
    "parse_series_csv",
    "predict",
    "read_grid",
    "rule_based_forecast",
    "rule_based_week",
    "save_model",
    "scale_row",
    "train",
    "unscale",
    "weighted_mape",
]
