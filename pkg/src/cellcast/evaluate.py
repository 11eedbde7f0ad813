"""Weighted MAPE over forecast grids.

Per point the error is ``|actual - pred| / actual``; points with a zero
actual are skipped and counted. Within a tech all (cell, indicator, hour)
points are pooled into one weighted mean, the first forecast day weighted
1.2 and the other six days 1.0. The techs are then blended 0.7 (4G) and
0.3 (5G); when only one tech is present it takes the full weight.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import CellcastError, ParseError, ValidationError
from .fileio import atomic_write
from .ingest import Tech, format_hour, format_value, parse_hour, parse_indicator, parse_tech
from .preprocess import HOURS_PER_DAY, N_TARGET

TECH_WEIGHTS = {Tech.FourG: 0.7, Tech.FiveG: 0.3}
FIRST_DAY_WEIGHT = 1.2
OTHER_DAY_WEIGHT = 1.0
GRID_COLUMNS = ("cell_id", "tech", "indicator", "hour_index", "value")


def hour_weights(first_day=FIRST_DAY_WEIGHT, other_days=OTHER_DAY_WEIGHT) -> np.ndarray:
    w = np.full(N_TARGET, other_days)
    w[:HOURS_PER_DAY] = first_day
    return w


@dataclass
class ForecastGrid:
    """168 hourly values per ``(cell_id, indicator, tech)`` for one week."""

    week_start: datetime
    entries: dict = field(default_factory=dict)

    def __setitem__(self, key, values):
        cell_id, indicator, tech = key
        values = np.array(values, dtype=np.float64)
        if values.shape != (N_TARGET,):
            raise ValidationError(f"{cell_id}: forecast must have {N_TARGET} values, got {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValidationError(f"{cell_id}: forecast values must be finite and non-negative")
        self.entries[(cell_id, parse_indicator(indicator), parse_tech(tech))] = values

    def __getitem__(self, key):
        return self.entries[key]

    def __len__(self):
        return len(self.entries)

    def keys(self):
        return sorted(self.entries, key=_key_order)

    def __eq__(self, other):
        if not isinstance(other, ForecastGrid):
            return NotImplemented
        return (
            self.week_start == other.week_start
            and self.entries.keys() == other.entries.keys()
            and all(np.array_equal(v, other.entries[k]) for k, v in self.entries.items())
        )

    def scaled(self, c) -> "ForecastGrid":
        out = ForecastGrid(self.week_start)
        for k, v in self.entries.items():
            out[k] = v * c
        return out


def _key_order(key):
    return (key[0], key[1].value, key[2].value)


def write_grid(grid: ForecastGrid, fh) -> None:
    fh.write(f"# week_start={format_hour(grid.week_start)}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(GRID_COLUMNS)
    for key in grid.keys():
        cell_id, indicator, tech = key
        for h, v in enumerate(grid.entries[key]):
            writer.writerow((cell_id, tech.value, indicator.value, h, format_value(v)))


def save_grid(grid: ForecastGrid, path) -> None:
    with atomic_write(path) as fh:
        write_grid(grid, fh)


def read_grid(path) -> ForecastGrid:
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline().strip()
        prefix = "# week_start="
        if not first.startswith(prefix):
            raise ParseError("first line must be '# week_start=YYYY-MM-DDTHH:00'", path, 1)
        try:
            week_start = parse_hour(first[len(prefix) :])
        except ValueError as exc:
            raise ParseError(f"bad week_start: {exc}", path, 1) from None
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != GRID_COLUMNS:
            raise ParseError(f"header must be {','.join(GRID_COLUMNS)}", path, 2)
        raw = {}
        for row in reader:
            lineno = reader.line_num + 1
            if not row:
                continue
            if len(row) != len(GRID_COLUMNS):
                raise ParseError(f"expected {len(GRID_COLUMNS)} fields", path, lineno)
            try:
                tech = parse_tech(row[1].strip())
                indicator = parse_indicator(row[2].strip())
                hour = int(row[3])
                value = float(row[4])
            except ValidationError as exc:
                raise ValidationError(str(exc), path, lineno) from None
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
            if not 0 <= hour < N_TARGET:
                raise ValidationError(f"hour_index {hour} outside 0..{N_TARGET - 1}", path, lineno)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"value {row[4]!r} must be finite and non-negative", path, lineno)
            values = raw.setdefault((row[0].strip(), indicator, tech), np.full(N_TARGET, np.nan))
            if not math.isnan(values[hour]):
                raise ValidationError(f"duplicate hour {hour} for {row[0]}", path, lineno)
            values[hour] = value
    grid = ForecastGrid(week_start)
    for key, values in raw.items():
        if np.isnan(values).any():
            raise ValidationError(f"{key[0]}/{key[1]}/{key[2]}: not all {N_TARGET} hours present", path)
        grid[key] = values
    return grid


@dataclass
class EvalReport:
    mape_4g: float
    mape_5g: float
    weighted_mape: float
    n_points_scored: int
    n_points_skipped_zero_actual: int
    breakdown: list = field(default_factory=list)


def _pooled(errors, weights):
    num = math.fsum(float(x) for x in np.concatenate(errors) * np.concatenate(weights))
    den = math.fsum(float(x) for x in np.concatenate(weights))
    return num / den


def weighted_mape(pred: ForecastGrid, actual: ForecastGrid, tech_weights=None, day_weights=None) -> EvalReport:
    """Score ``pred`` against ``actual``; MAPEs are fractions, not percent.

    Raises
    ------
    ValidationError
        If the grids cover different keys or weeks.
    CellcastError
        If every actual value is zero.
    """
    tech_weights = TECH_WEIGHTS if tech_weights is None else tech_weights
    day_weights = hour_weights() if day_weights is None else np.asarray(day_weights, dtype=np.float64)
    if pred.week_start != actual.week_start:
        raise ValidationError(
            f"week starts differ: pred {format_hour(pred.week_start)}, actual {format_hour(actual.week_start)}"
        )
    missing = [k for k in actual.keys() if k not in pred.entries]
    extra = [k for k in pred.keys() if k not in actual.entries]
    if missing or extra:
        fmt = lambda ks: ", ".join(f"{c}/{i}/{t}" for c, i, t in ks)
        parts = []
        if missing:
            parts.append(f"missing from prediction: {fmt(missing)}")
        if extra:
            parts.append(f"not in actual: {fmt(extra)}")
        raise ValidationError("; ".join(parts))

    per_tech = {}
    per_group = {}
    skipped = 0
    for key in actual.keys():
        _, indicator, tech = key
        a = actual.entries[key]
        p = pred.entries[key]
        scored = a > 0
        skipped += int((~scored).sum())
        ape = np.abs(a[scored] - p[scored]) / a[scored]
        w = day_weights[scored]
        for bucket in (per_tech.setdefault(tech, ([], [])), per_group.setdefault((tech, indicator), ([], []))):
            bucket[0].append(ape)
            bucket[1].append(w)

    mapes = {}
    n_scored = 0
    for tech, (errs, ws) in per_tech.items():
        n = sum(len(e) for e in errs)
        if n:
            mapes[tech] = _pooled(errs, ws)
            n_scored += n
    if not mapes:
        raise CellcastError("no scorable points: every actual value is zero")
    total_weight = sum(tech_weights[t] for t in mapes)
    weighted = sum((tech_weights[t] / total_weight) * m for t, m in sorted(mapes.items(), key=lambda kv: kv[0].value))

    breakdown = []
    for (tech, indicator), (errs, ws) in sorted(per_group.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)):
        n = sum(len(e) for e in errs)
        breakdown.append((tech.value, indicator.value, _pooled(errs, ws) if n else math.nan, n))
    for tech in sorted(per_tech, key=lambda t: t.value):
        n = sum(len(e) for e in per_tech[tech][0])
        breakdown.append((tech.value, "ALL", mapes.get(tech, math.nan), n))

    return EvalReport(
        mape_4g=mapes.get(Tech.FourG, math.nan),
        mape_5g=mapes.get(Tech.FiveG, math.nan),
        weighted_mape=weighted,
        n_points_scored=n_scored,
        n_points_skipped_zero_actual=skipped,
        breakdown=breakdown,
    )


def write_breakdown(report: EvalReport, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(("tech", "indicator", "mape", "n_points"))
    for tech, indicator, mape, n in report.breakdown:
        writer.writerow((tech, indicator, repr(mape), n))


def evaluate_run(pred_path, actual_path, breakdown_path=None) -> EvalReport:
    report = weighted_mape(read_grid(pred_path), read_grid(actual_path))
    if breakdown_path is not None:
        with atomic_write(breakdown_path) as fh:
            write_breakdown(report, fh)
    return report
