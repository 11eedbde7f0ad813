"""Seasonal gap filling and sliding-window featurization.

A sample row covers 28 consecutive days: 21 days (504 hours) of history
scaled by their own mean, 7 days (168 hours) of targets, and one holiday
flag per day of the whole span.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DegenerateRowError, ImputationError, ParseError
from .ingest import CellSeries, HolidayCalendar, format_hour, parse_hour, parse_indicator, parse_tech

HOURS_PER_DAY = 24
HOURS_PER_WEEK = 168
HISTORY_DAYS = 21
TARGET_DAYS = 7
WINDOW_DAYS = HISTORY_DAYS + TARGET_DAYS
N_FLAGS = WINDOW_DAYS
N_HISTORY = HISTORY_DAYS * HOURS_PER_DAY
N_TARGET = TARGET_DAYS * HOURS_PER_DAY
N_INPUTS = N_FLAGS + N_HISTORY


@dataclass(frozen=True, eq=False)
class SampleRow:
    """One model row.

    ``target`` holds unscaled values (``None`` at inference time);
    ``origin`` is ``(cell_id, indicator, tech, window_start)``.
    """

    holiday_flags: np.ndarray
    scaled_history: np.ndarray
    scale: float
    target: np.ndarray | None
    origin: tuple

    def __post_init__(self):
        if self.holiday_flags.shape != (N_FLAGS,) or self.scaled_history.shape != (N_HISTORY,):
            raise ValueError("sample row has wrong input width")
        if self.target is not None and self.target.shape != (N_TARGET,):
            raise ValueError("sample row target must have 168 values")
        if not self.scale > 0:
            raise ValueError("sample row scale must be positive")

    @property
    def inputs(self) -> np.ndarray:
        """The 532 model inputs: holiday flags then scaled history."""
        return np.concatenate([self.holiday_flags.astype(np.float64), self.scaled_history])

    @property
    def scaled_target(self) -> np.ndarray | None:
        return None if self.target is None else self.target / self.scale


def impute(series: CellSeries) -> CellSeries:
    """Fill every missing hour from the same hour of other weeks.

    Each present value ``k`` weeks away contributes with weight ``1/k``,
    looking both backwards and forwards over the whole series. Only values
    that were present on input are read, so the result does not depend on
    fill order and a second call is a no-op.

    Raises
    ------
    ImputationError
        If some missing hour has no present value at the same hour-of-week.
    """
    if not series.missing.any():
        return series
    filled, bad = kernels.impute_weekly(series.values, HOURS_PER_WEEK)
    if bad >= 0:
        ts = series.timestamp(int(bad))
        raise ImputationError(
            f"{series.cell_id}/{series.indicator}: no same hour-of-week value to fill {format_hour(ts)}",
            timestamp=ts,
        )
    return series.with_values(filled)


def holiday_vector(calendar: HolidayCalendar, window_start) -> np.ndarray:
    if isinstance(window_start, datetime):
        window_start = window_start.date()
    return np.array(
        [calendar.flag(window_start + timedelta(days=i)) for i in range(N_FLAGS)],
        dtype=np.int8,
    )


def scale_row(history, target=None):
    """Divide a row by the mean of its history.

    Returns ``(scaled_history, scale, scaled_target)``; ``scaled_target`` is
    ``None`` when no target was given.

    Raises
    ------
    DegenerateRowError
        When the history mean is zero.
    """
    history = np.asarray(history, dtype=np.float64)
    scale = float(history.mean())
    if not scale > 0:
        raise DegenerateRowError("history mean is zero; row cannot be scaled")
    scaled_target = None
    if target is not None:
        scaled_target = np.asarray(target, dtype=np.float64) / scale
    return history / scale, scale, scaled_target


def unscale(scaled_output, scale: float) -> np.ndarray:
    return np.asarray(scaled_output, dtype=np.float64) * scale


def _check_ready(series: CellSeries):
    if series.start.hour != 0:
        raise ValueError(f"{series.cell_id}: series must start at hour 0 of a day")
    if series.missing.any():
        raise ValueError(f"{series.cell_id}: series still has missing values; impute first")


def _make_row(series, calendar, offset_days, with_target):
    lo = offset_days * HOURS_PER_DAY
    history = series.values[lo : lo + N_HISTORY]
    target = series.values[lo + N_HISTORY : lo + N_HISTORY + N_TARGET] if with_target else None
    scaled, scale, _ = scale_row(history)
    window_start = series.start + timedelta(days=offset_days)
    return SampleRow(
        holiday_flags=holiday_vector(calendar, window_start),
        scaled_history=scaled,
        scale=scale,
        target=None if target is None else np.array(target),
        origin=(series.cell_id, series.indicator, series.tech, window_start),
    )


def extract_windows(series, calendar, stride_days=1, with_targets=True, max_rows=None):
    """Slide a day-aligned 28-day window over an imputed series.

    Windows start every ``stride_days`` days from the first day. Without
    targets only the 21 history days need to fit. Rows with an all-zero
    history are skipped. ``max_rows`` keeps the most recent rows.
    """
    if stride_days < 1:
        raise ValueError("stride_days must be a positive integer")
    _check_ready(series)
    n_days = len(series) // HOURS_PER_DAY
    span = WINDOW_DAYS if with_targets else HISTORY_DAYS
    rows = []
    for offset in range(0, n_days - span + 1, stride_days):
        try:
            rows.append(_make_row(series, calendar, offset, with_targets))
        except DegenerateRowError:
            continue
    if max_rows is not None:
        rows = rows[len(rows) - max_rows :] if max_rows > 0 else []
    return rows


def inference_row(series: CellSeries, calendar: HolidayCalendar) -> SampleRow:
    """The row whose 21-day history ends exactly where the series ends.

    Its forecast week is the 7 days right after the series.

    Raises
    ------
    DegenerateRowError
        When the last 21 days are all zero.
    """
    _check_ready(series)
    if len(series) % HOURS_PER_DAY:
        raise ValueError(f"{series.cell_id}: series must end on a day boundary")
    n_days = len(series) // HOURS_PER_DAY
    if n_days < HISTORY_DAYS:
        raise ValueError(f"{series.cell_id}: need at least {HISTORY_DAYS} days of history")
    return _make_row(series, calendar, n_days - HISTORY_DAYS, with_target=False)


def stack_rows(rows):
    """Stack rows into ``(inputs, scaled_targets, scales)`` arrays.

    ``scaled_targets`` is ``None`` if any row lacks a target.
    """
    rows = list(rows)
    if not rows:
        return np.empty((0, N_INPUTS)), np.empty((0, N_TARGET)), np.empty(0)
    inputs = np.stack([r.inputs for r in rows])
    scales = np.array([r.scale for r in rows])
    if any(r.target is None for r in rows):
        return inputs, None, scales
    targets = np.stack([r.target for r in rows]) / scales[:, None]
    return inputs, targets, scales


def feature_header(with_targets: bool):
    cols = ["cell_id", "indicator", "tech", "window_start", "scale"]
    cols += [f"h{i}" for i in range(1, N_FLAGS + 1)]
    cols += [f"x{i}" for i in range(1, N_HISTORY + 1)]
    if with_targets:
        cols += [f"y{i}" for i in range(1, N_TARGET + 1)]
    return cols


def write_features(rows, fh) -> None:
    rows = list(rows)
    with_targets = bool(rows) and all(r.target is not None for r in rows)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(feature_header(with_targets))
    for r in rows:
        cell_id, indicator, tech, window_start = r.origin
        line = [cell_id, indicator.value, tech.value, format_hour(window_start), repr(r.scale)]
        line += [str(int(f)) for f in r.holiday_flags]
        line += [repr(float(v)) for v in r.scaled_history]
        if with_targets:
            line += [repr(float(v)) for v in r.target]
        writer.writerow(line)


def read_features(path) -> list[SampleRow]:
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header == feature_header(True):
            with_targets = True
        elif header == feature_header(False):
            with_targets = False
        else:
            raise ParseError("unexpected feature file header", path, 1)
        for line in reader:
            lineno = reader.line_num
            if not line:
                continue
            if len(line) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(line)}", path, lineno)
            try:
                origin = (line[0], parse_indicator(line[1]), parse_tech(line[2]), parse_hour(line[3]))
                nums = np.array(line[4:], dtype=np.float64)
            except (ValueError, ParseError) as exc:
                raise ParseError(str(exc), path, lineno) from None
            flags = nums[1 : 1 + N_FLAGS]
            if not np.all((flags == 0) | (flags == 1)):
                raise ParseError("holiday flags must be 0 or 1", path, lineno)
            lo = 1 + N_FLAGS
            rows.append(
                SampleRow(
                    holiday_flags=flags.astype(np.int8),
                    scaled_history=nums[lo : lo + N_HISTORY],
                    scale=float(nums[0]),
                    target=nums[lo + N_HISTORY :] if with_targets else None,
                    origin=origin,
                )
            )
    return rows
