"""Comparison forecasters: last-week repeat and the periodic rule-based blend."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .ingest import HOUR, CellSeries
from .preprocess import HOURS_PER_DAY, HOURS_PER_WEEK, N_TARGET


@dataclass(frozen=True)
class RuleParams:
    """Smoothing constants and blend weights of the rule-based forecaster.

    ``weights`` multiply, in order: smoothed same-hour-of-day values,
    smoothed same-hour-of-week values, their two means, their two medians.
    """

    alpha1: float = 0.82
    alpha2: float = 0.82
    weights: tuple = (0.07, 0.13, 0.14, 0.26, 0.14, 0.26)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != 6:
            raise ValueError("RuleParams needs exactly six weights")
        for a in (self.alpha1, self.alpha2):
            if not 0 < a <= 1:
                raise ValueError("smoothing parameters must lie in (0, 1]")
        if not all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")


def _require_complete(series: CellSeries):
    if series.missing.any():
        raise ValueError(f"{series.cell_id}: impute the series before forecasting")


def naive_forecast(series: CellSeries, horizon_hours=N_TARGET) -> np.ndarray:
    """Repeat the last ``horizon_hours`` observed values."""
    _require_complete(series)
    if len(series) < horizon_hours:
        raise ValueError(f"{series.cell_id}: series shorter than {horizon_hours} hours")
    return np.array(series.values[len(series) - horizon_hours :])


def exp_smooth(x, alpha) -> float:
    """``sum((1 - alpha)**(n - i) * x[i] for i < n) + alpha * x[n]`` (1-based).

    Older points carry no ``alpha`` factor, so the weights do not sum to
    one; this is the intended form, not the textbook recursion.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n == 0:
        raise ValueError("exp_smooth needs at least one value")
    powers = (1.0 - alpha) ** np.arange(n - 1, 0, -1)
    return float(powers @ x[:-1] + alpha * x[-1])


def _subseries(series, target_time: datetime):
    # Only points strictly before target_time count as history.
    offset = int((target_time - series.start) / HOUR)
    n_hist = min(offset, len(series))
    if n_hist <= 0:
        raise ValueError("target time precedes the series")
    hist = series.values[:n_hist]
    by_day = hist[(offset % HOURS_PER_DAY) :: HOURS_PER_DAY]
    by_week = hist[(offset % HOURS_PER_WEEK) :: HOURS_PER_WEEK]
    return by_day, by_week


def rule_based_forecast(series: CellSeries, target_time: datetime, params: RuleParams = RuleParams()) -> float:
    """Weighted blend of six statistics of the same-hour-of-day and same-hour-of-week history.

    The sub-series are drawn, in time order, from the part of ``series``
    before ``target_time``.
    """
    _require_complete(series)
    if (target_time - series.start) % HOUR:
        raise ValueError("target time must be on the hour")
    s1, s2 = _subseries(series, target_time)
    if len(s1) == 0 or len(s2) == 0:
        raise ValueError(f"{series.cell_id}: no history at the target's hour-of-day or hour-of-week")
    w = params.weights
    return (
        w[0] * exp_smooth(s1, params.alpha1)
        + w[1] * exp_smooth(s2, params.alpha2)
        + w[2] * float(np.mean(s1))
        + w[3] * float(np.mean(s2))
        + w[4] * float(np.median(s1))
        + w[5] * float(np.median(s2))
    )


def rule_based_week(series: CellSeries, week_start: datetime | None = None, params: RuleParams = RuleParams()) -> np.ndarray:
    """Rule-based forecast for each hour of the week starting at ``week_start``.

    ``week_start`` defaults to the hour after the series ends; it may not
    fall before that, so forecast-week values never feed the forecast.
    """
    if week_start is None:
        week_start = series.end
    if week_start < series.end:
        raise ValueError("forecast week overlaps the series")
    return np.array([rule_based_forecast(series, week_start + i * HOUR, params) for i in range(N_TARGET)])
