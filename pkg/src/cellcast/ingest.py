"""Reading and writing hourly KPI series and holiday calendars."""

from __future__ import annotations

import csv
import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

SERIES_COLUMNS = ("cell_id", "tech", "indicator", "timestamp", "value")
HOUR = timedelta(hours=1)


class Tech(enum.Enum):
    FourG = "4G"
    FiveG = "5G"

    def __str__(self):
        return self.value


class Indicator(enum.Enum):
    PUSCH = "PUSCH"
    PDSCH = "PDSCH"
    PDCCH = "PDCCH"
    RRC = "RRC"
    PDCPUL = "PDCPUL"
    PDCPDL = "PDCPDL"

    def __str__(self):
        return self.value


def parse_tech(token) -> Tech:
    if isinstance(token, Tech):
        return token
    try:
        return Tech(token)
    except ValueError:
        raise ValidationError(f"unknown tech {token!r} (expected 4G or 5G)") from None


def parse_indicator(token) -> Indicator:
    if isinstance(token, Indicator):
        return token
    try:
        return Indicator(token)
    except ValueError:
        names = ", ".join(i.value for i in Indicator)
        raise ValidationError(f"unknown indicator {token!r} (expected one of {names})") from None


def parse_hour(text: str) -> datetime:
    """Parse an ISO timestamp that must sit exactly on the hour."""
    ts = datetime.fromisoformat(text.strip())
    if ts.tzinfo is not None:
        raise ValueError("timestamps must be naive local time")
    if ts.minute or ts.second or ts.microsecond:
        raise ValueError("timestamp is not on the hour")
    return ts


def format_hour(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:00")


def format_value(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


@dataclass(frozen=True, eq=False)
class CellSeries:
    """One cell x indicator hourly series.

    ``values[i]`` is the reading at ``start + i`` hours; NaN marks a missing
    point. The array is stored read-only.
    """

    cell_id: str
    tech: Tech
    indicator: Indicator
    start: datetime
    values: np.ndarray
    city: str | None = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValidationError("series values must be one-dimensional")
        present = values[~np.isnan(values)]
        if not np.all(np.isfinite(present)):
            raise ValidationError(f"{self.cell_id}: non-finite value in series")
        if np.any(present < 0):
            raise ValidationError(f"{self.cell_id}: negative value in series")
        if self.start.minute or self.start.second or self.start.microsecond:
            raise ValidationError(f"{self.cell_id}: series start is not on the hour")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tech", parse_tech(self.tech))
        object.__setattr__(self, "indicator", parse_indicator(self.indicator))

    @property
    def key(self):
        return (self.cell_id, self.tech, self.indicator)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def end(self) -> datetime:
        """Timestamp one hour past the last point."""
        return self.start + len(self.values) * HOUR

    def timestamp(self, i: int) -> datetime:
        return self.start + i * HOUR

    def with_values(self, values) -> "CellSeries":
        return CellSeries(self.cell_id, self.tech, self.indicator, self.start, values, self.city)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, CellSeries):
            return NotImplemented
        return (
            self.key == other.key
            and self.start == other.start
            and self.city == other.city
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None


@dataclass(frozen=True)
class HolidayCalendar:
    holidays: frozenset = frozenset()

    def __contains__(self, day) -> bool:
        if isinstance(day, datetime):
            day = day.date()
        return day in self.holidays

    def flag(self, day) -> int:
        return int(day in self)


def parse_series_csv(path) -> list[CellSeries]:
    """Group a long-format KPI CSV into contiguous hourly series.

    Rows may come in any order. Hours absent from the file between a
    series' first and last timestamp become NaN. An optional ``city``
    column is carried through as metadata.
    """
    path = Path(path)
    groups = defaultdict(dict)
    cities = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", path, 1) from None
        header = [h.strip() for h in header]
        missing_cols = [c for c in SERIES_COLUMNS if c not in header]
        if missing_cols:
            raise ParseError(f"header lacks columns {missing_cols}", path, 1)
        col = {name: header.index(name) for name in SERIES_COLUMNS}
        city_col = header.index("city") if "city" in header else None
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
            try:
                tech = parse_tech(row[col["tech"]].strip())
                indicator = parse_indicator(row[col["indicator"]].strip())
            except ValidationError as exc:
                raise ValidationError(str(exc), path, lineno) from None
            try:
                ts = parse_hour(row[col["timestamp"]])
            except ValueError as exc:
                raise ParseError(f"bad timestamp {row[col['timestamp']]!r}: {exc}", path, lineno) from None
            text = row[col["value"]].strip()
            if text == "":
                value = math.nan
            else:
                try:
                    value = float(text)
                except ValueError:
                    raise ParseError(f"bad value {text!r}", path, lineno) from None
                if not math.isfinite(value):
                    raise ValidationError(f"non-finite value {text!r}", path, lineno)
                if value < 0:
                    raise ValidationError(f"negative value {text!r}", path, lineno)
            key = (row[col["cell_id"]].strip(), tech, indicator)
            points = groups[key]
            if ts in points:
                old = points[ts]
                same = (math.isnan(old) and math.isnan(value)) or old == value
                if not same:
                    raise ValidationError(
                        f"conflicting duplicate for {key[0]}/{indicator} at {format_hour(ts)}",
                        path,
                        lineno,
                    )
            points[ts] = value
            if city_col is not None and row[city_col].strip():
                cities[key] = row[city_col].strip()

    series = []
    for key in sorted(groups, key=lambda k: (k[0], k[1].value, k[2].value)):
        points = groups[key]
        start = min(points)
        n = int((max(points) - start) / HOUR) + 1
        values = np.full(n, np.nan)
        for ts, v in points.items():
            values[int((ts - start) / HOUR)] = v
        series.append(CellSeries(key[0], key[1], key[2], start, values, cities.get(key)))
    return series


def write_series_csv(series, fh) -> None:
    """Write series in long format to an open text file handle.

    Missing points are written as rows with an empty value so the series
    extent survives a round trip.
    """
    series = list(series)
    with_city = any(s.city is not None for s in series)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SERIES_COLUMNS + (("city",) if with_city else ()))
    for s in series:
        tail = (s.city or "",) if with_city else ()
        for i, v in enumerate(s.values):
            writer.writerow((s.cell_id, s.tech.value, s.indicator.value, format_hour(s.timestamp(i)), format_value(v)) + tail)


def parse_holidays(path) -> HolidayCalendar:
    path = Path(path)
    days = set()
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                days.add(date.fromisoformat(text))
            except ValueError as exc:
                raise ParseError(f"bad date {text!r}: {exc}", path, lineno) from None
    return HolidayCalendar(frozenset(days))


def write_holidays(calendar: HolidayCalendar, fh) -> None:
    for day in sorted(calendar.holidays):
        fh.write(day.isoformat() + "\n")
