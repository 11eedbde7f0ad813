"""Seeded synthetic KPI corpora with daily and weekly cycles.

Each cell x indicator series is::

    max(0, base + daily_amp * sin(2 pi h/24 + phi) + weekly_amp * sin(2 pi H/168 + psi)
           + holiday_dip * [holiday] + noise)

with ``h``/``H`` the hour-of-day/hour-of-week and per-series phases. The
last seven days are held out as the actual forecast grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from .evaluate import ForecastGrid, save_grid
from .fileio import atomic_write
from .ingest import CellSeries, HolidayCalendar, Indicator, Tech, parse_indicator, write_holidays, write_series_csv
from .preprocess import HOURS_PER_DAY, HOURS_PER_WEEK, TARGET_DAYS, WINDOW_DAYS

DEFAULT_START = datetime(2021, 3, 1)


@dataclass
class SynthConfig:
    n_cells_4g: int = 50
    n_cells_5g: int = 10
    n_days: int = 42
    daily_amp: float = 40.0
    weekly_amp: float = 15.0
    base_level: float = 100.0
    noise_sd: float = 5.0
    missing_rate: float = 0.02
    holiday_dates: tuple = (date(2021, 3, 15),)
    holiday_dip: float = -20.0
    seed: int = 0
    indicators: tuple = (Indicator.PDSCH,)
    start: datetime = DEFAULT_START

    def __post_init__(self):
        self.indicators = tuple(parse_indicator(i) for i in self.indicators)
        self.holiday_dates = tuple(d if isinstance(d, date) else date.fromisoformat(d) for d in self.holiday_dates)
        problems = []
        if self.n_cells_4g < 0 or self.n_cells_5g < 0 or self.n_cells_4g + self.n_cells_5g == 0:
            problems.append("need a non-negative cell count per tech and at least one cell")
        if self.n_days < WINDOW_DAYS + TARGET_DAYS:
            problems.append(f"n_days must be >= {WINDOW_DAYS + TARGET_DAYS}")
        if not self.base_level > self.daily_amp + self.weekly_amp:
            problems.append("base_level must exceed daily_amp + weekly_amp")
        if not 0 <= self.missing_rate < 1:
            problems.append("missing_rate must lie in [0, 1)")
        if self.noise_sd < 0:
            problems.append("noise_sd must be >= 0")
        if not self.indicators:
            problems.append("need at least one indicator")
        if self.start.hour or self.start.minute:
            problems.append("start must be midnight")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def train_days(self) -> int:
        return self.n_days - TARGET_DAYS


@dataclass
class SynthCorpus:
    series: list
    calendar: HolidayCalendar
    actual: ForecastGrid
    truth: list = field(default_factory=list)


def _cells(config):
    cells = [(f"c4g{i:04d}", Tech.FourG) for i in range(config.n_cells_4g)]
    cells += [(f"c5g{i:04d}", Tech.FiveG) for i in range(config.n_cells_5g)]
    return cells


def generate(config: SynthConfig) -> SynthCorpus:
    """Build the corpus in memory.

    ``series`` holds the training span with its missing mask applied,
    ``actual`` the held-out week and ``truth`` the unmasked training span.
    Every hour-of-week keeps at least one present value so imputation
    always succeeds.
    """
    n_hours = config.n_days * HOURS_PER_DAY
    n_train = config.train_days * HOURS_PER_DAY
    t = np.arange(n_hours)
    hod = t % HOURS_PER_DAY
    how = t % HOURS_PER_WEEK
    days = [config.start.date() + timedelta(days=int(d)) for d in t // HOURS_PER_DAY]
    holiday_set = frozenset(config.holiday_dates)
    on_holiday = np.array([d in holiday_set for d in days], dtype=np.float64)
    calendar = HolidayCalendar(holiday_set)
    actual = ForecastGrid(config.start + timedelta(days=config.train_days))

    series, truth = [], []
    for index, (cell_id, tech) in enumerate(_cells(config)):
        rng = np.random.default_rng([config.seed, index])
        for indicator in config.indicators:
            phi, psi = rng.uniform(0.0, 2 * np.pi, size=2)
            clean = (
                config.base_level
                + config.daily_amp * np.sin(2 * np.pi * hod / HOURS_PER_DAY + phi)
                + config.weekly_amp * np.sin(2 * np.pi * how / HOURS_PER_WEEK + psi)
                + config.holiday_dip * on_holiday
            )
            noise = rng.normal(0.0, config.noise_sd, size=n_hours) if config.noise_sd > 0 else 0.0
            values = np.round(np.maximum(clean + noise, 0.0), 3) + 0.0
            mask = rng.random(n_train) < config.missing_rate
            for phase in range(HOURS_PER_WEEK):
                if mask[phase::HOURS_PER_WEEK].all():
                    mask[phase + HOURS_PER_WEEK * (len(mask[phase::HOURS_PER_WEEK]) - 1)] = False
            train = values[:n_train].copy()
            truth.append(CellSeries(cell_id, tech, indicator, config.start, train.copy()))
            train[mask] = np.nan
            series.append(CellSeries(cell_id, tech, indicator, config.start, train))
            actual[(cell_id, indicator, tech)] = values[n_train:]
    return SynthCorpus(series=series, calendar=calendar, actual=actual, truth=truth)


def write_corpus(corpus: SynthCorpus, out_dir) -> dict:
    """Write ``series.csv``, ``holidays.txt`` and ``actual.csv``; return their paths."""
    out_dir = Path(out_dir)
    paths = {
        "series": out_dir / "series.csv",
        "holidays": out_dir / "holidays.txt",
        "actual": out_dir / "actual.csv",
    }
    with atomic_write(paths["series"]) as fh:
        write_series_csv(corpus.series, fh)
    with atomic_write(paths["holidays"]) as fh:
        write_holidays(corpus.calendar, fh)
    save_grid(corpus.actual, paths["actual"])
    return paths
