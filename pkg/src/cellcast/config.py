"""Flat ``key = value`` run configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path

from .baselines import RuleParams
from .errors import ParseError, ValidationError
from .ingest import parse_hour, parse_indicator, parse_tech
from .model import TrainConfig
from .synth import DEFAULT_START, SynthConfig

METHODS = ("naive", "rule")


def _int_or_none(text):
    return None if text.lower() in ("", "none") else int(text)


def _bool(text):
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return tuple(int(t) for t in text.replace(" ", "").split(",") if t)


def _float_list(text):
    return tuple(float(t) for t in text.replace(" ", "").split(",") if t)


def _str_list(text):
    return tuple(t for t in text.replace(" ", "").split(",") if t)


def _path_or_none(text):
    return None if text == "" else Path(text)


@dataclass
class RunConfig:
    """Every setting a subcommand can read, with the defaults used when unset."""

    seed: int = 0
    in_path: Path | None = None
    out_path: Path | None = None
    holidays: Path | None = None
    model: Path | None = None
    pred: Path | None = None
    actual: Path | None = None
    train_log: Path | None = None
    warm_start: Path | None = None
    indicator: str | None = None
    tech: str | None = None
    method: str = "naive"
    # featurization
    stride: int = 1
    max_rows: int | None = None
    # training
    epochs: int = 128
    lr0: float = 0.0005
    batch_sizes: tuple = (8192, 16384)
    d_hidden: int = 4096
    relu_in_training: bool = False
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # rule-based baseline
    rule_alpha1: float = 0.82
    rule_alpha2: float = 0.82
    rule_weights: tuple = (0.07, 0.13, 0.14, 0.26, 0.14, 0.26)
    # synthetic corpus
    n_cells_4g: int = 50
    n_cells_5g: int = 10
    n_days: int = 42
    daily_amp: float = 40.0
    weekly_amp: float = 15.0
    base_level: float = 100.0
    noise_sd: float = 5.0
    missing_rate: float = 0.02
    holiday_dates: tuple = ("2021-03-15",)
    holiday_dip: float = -20.0
    indicators: tuple = ("PDSCH",)
    start: datetime = field(default=DEFAULT_START)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            lr0=self.lr0,
            batch_candidates=self.batch_sizes,
            seed=self.seed,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            d_hidden=self.d_hidden,
            relu_in_training=self.relu_in_training,
        )

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            n_cells_4g=self.n_cells_4g,
            n_cells_5g=self.n_cells_5g,
            n_days=self.n_days,
            daily_amp=self.daily_amp,
            weekly_amp=self.weekly_amp,
            base_level=self.base_level,
            noise_sd=self.noise_sd,
            missing_rate=self.missing_rate,
            holiday_dates=tuple(date.fromisoformat(d) for d in self.holiday_dates),
            holiday_dip=self.holiday_dip,
            seed=self.seed,
            indicators=self.indicators,
            start=self.start,
        )

    def rule_params(self) -> RuleParams:
        return RuleParams(self.rule_alpha1, self.rule_alpha2, self.rule_weights)

    def check(self):
        """Validate cross-field constraints by building every sub-config."""
        try:
            self.train_config()
            self.synth_config()
            self.rule_params()
            if self.indicator is not None:
                parse_indicator(self.indicator)
            if self.tech is not None:
                parse_tech(self.tech)
            for name in self.indicators:
                parse_indicator(name)
        except (ValueError, ValidationError) as exc:
            raise ValidationError(f"invalid configuration: {exc}") from None
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.stride < 1:
            raise ValidationError("stride must be a positive integer")
        if self.max_rows is not None and self.max_rows < 1:
            raise ValidationError("max_rows must be positive")
        return self


# config-file key -> (dataclass field, parser)
KEYS = {
    "seed": ("seed", int),
    "in": ("in_path", _path_or_none),
    "out": ("out_path", _path_or_none),
    "holidays": ("holidays", _path_or_none),
    "model": ("model", _path_or_none),
    "pred": ("pred", _path_or_none),
    "actual": ("actual", _path_or_none),
    "train_log": ("train_log", _path_or_none),
    "warm_start": ("warm_start", _path_or_none),
    "indicator": ("indicator", lambda s: s or None),
    "tech": ("tech", lambda s: s or None),
    "method": ("method", str),
    "stride": ("stride", int),
    "max_rows": ("max_rows", _int_or_none),
    "epochs": ("epochs", int),
    "lr0": ("lr0", float),
    "batch_sizes": ("batch_sizes", _int_list),
    "d_hidden": ("d_hidden", int),
    "relu_in_training": ("relu_in_training", _bool),
    "adam_beta1": ("adam_beta1", float),
    "adam_beta2": ("adam_beta2", float),
    "adam_eps": ("adam_eps", float),
    "rule_alpha1": ("rule_alpha1", float),
    "rule_alpha2": ("rule_alpha2", float),
    "rule_weights": ("rule_weights", _float_list),
    "n_cells_4g": ("n_cells_4g", int),
    "n_cells_5g": ("n_cells_5g", int),
    "n_days": ("n_days", int),
    "daily_amp": ("daily_amp", float),
    "weekly_amp": ("weekly_amp", float),
    "base_level": ("base_level", float),
    "noise_sd": ("noise_sd", float),
    "missing_rate": ("missing_rate", float),
    "holiday_dates": ("holiday_dates", _str_list),
    "holiday_dip": ("holiday_dip", float),
    "indicators": ("indicators", _str_list),
    "start": ("start", parse_hour),
}


def apply(config: RunConfig, key: str, text: str, source="override", line=None) -> RunConfig:
    if key not in KEYS:
        raise ValidationError(f"unknown configuration key {key!r}", source, line)
    name, parse = KEYS[key]
    try:
        value = parse(text.strip())
    except ValueError as exc:
        raise ValidationError(f"bad value for {key!r}: {exc}", source, line) from None
    return dataclasses.replace(config, **{name: value})


def read_config(path, base: RunConfig | None = None) -> RunConfig:
    """Read a flat config file; ``#`` starts a comment, blank lines are ignored."""
    config = base or RunConfig()
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read config: {exc.strerror}", path) from None
    seen = set()
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ParseError("expected 'key = value'", path, lineno)
        key, value = (part.strip() for part in text.split("=", 1))
        if key in seen:
            raise ValidationError(f"key {key!r} set twice", path, lineno)
        seen.add(key)
        config = apply(config, key, value, path, lineno)
    return config
