"""Command line front end.

Every subcommand reads an optional flat config file (``--config``) and then
applies command line overrides. Outputs are written atomically. Exit status
is 0 on success and 1 for bad input or configuration; anything else exits 2.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, evaluate, preprocess, synth
from .config import RunConfig, apply, read_config
from .errors import CellcastError, DegenerateRowError, ImputationError, ValidationError
from .evaluate import ForecastGrid
from .fileio import atomic_write
from .ingest import Tech, parse_holidays, parse_indicator, parse_series_csv, parse_tech, write_series_csv
from .model import load_model, predict, save_model, train, write_train_log

log = logging.getLogger("cellcast")

SUBCOMMANDS = ("synth", "impute", "featurize", "train", "predict", "baseline", "evaluate", "pipeline")

# flag -> config key
OVERRIDES = {
    "--seed": "seed",
    "--in": "in",
    "--out": "out",
    "--holidays": "holidays",
    "--model": "model",
    "--pred": "pred",
    "--actual": "actual",
    "--train-log": "train_log",
    "--indicator": "indicator",
    "--tech": "tech",
    "--stride": "stride",
    "--max-rows": "max_rows",
    "--epochs": "epochs",
    "--lr0": "lr0",
    "--batch-sizes": "batch_sizes",
    "--d-hidden": "d_hidden",
    "--warm-start": "warm_start",
    "--method": "method",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    for flag, key in OVERRIDES.items():
        common.add_argument(flag, dest=key, metavar=key.upper(), default=None)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cellcast", description="Cell-level KPI forecasting pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "write a synthetic corpus (series.csv, holidays.txt, actual.csv) into --out",
        "impute": "fill missing hours of a series CSV",
        "featurize": "turn an imputed series CSV into a feature file",
        "train": "train one indicator x tech model from a feature file",
        "predict": "forecast the week after each series with a trained model",
        "baseline": "forecast with the naive or rule-based method",
        "evaluate": "score a forecast grid against actual values",
        "pipeline": "synth -> impute -> featurize -> train -> predict -> evaluate in --out",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(args) -> RunConfig:
    config = read_config(args.config) if args.config else RunConfig()
    for key in OVERRIDES.values():
        value = getattr(args, key)
        if value is not None:
            config = apply(config, key, value)
    for item in args.set:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        config = apply(config, key.strip(), value)
    return config.check()


def _need(config, *names):
    flags = {v: k for k, v in OVERRIDES.items()}
    for name in names:
        field = {"in": "in_path", "out": "out_path"}.get(name, name)
        if getattr(config, field) is None:
            raise ValidationError(f"missing required setting {name!r} (use {flags.get(name, '--set ' + name + '=...')})")


def _need_files(*paths):
    for path in paths:
        if path is not None and not Path(path).is_file():
            raise ValidationError(f"input file not found: {path}")


def _select(items, config, key=lambda s: (s.indicator, s.tech)):
    indicator = parse_indicator(config.indicator) if config.indicator else None
    tech = parse_tech(config.tech) if config.tech else None
    return [s for s in items if (indicator is None or key(s)[0] == indicator) and (tech is None or key(s)[1] == tech)]


def _load_complete_series(config):
    series = _select(parse_series_csv(config.in_path), config)
    if not series:
        raise ValidationError(f"{config.in_path}: no series match the indicator/tech selection")
    for s in series:
        if s.missing.any():
            raise ValidationError(f"{config.in_path}: series {s.cell_id}/{s.indicator} has missing values; run impute first")
    return series


def _week_start(series):
    ends = {s.end for s in series}
    if len(ends) != 1:
        raise ValidationError("all series must end at the same hour to share a forecast week")
    return ends.pop()


def cmd_synth(config):
    _need(config, "out")
    paths = synth.write_corpus(synth.generate(config.synth_config()), config.out_path)
    for name, path in paths.items():
        print(f"{name}: {path}")


def impute_all(series):
    done = []
    for s in series:
        try:
            done.append(preprocess.impute(s))
        except ImputationError as exc:
            log.warning("dropping series: %s", exc)
    return done


def cmd_impute(config):
    _need(config, "in", "out")
    _need_files(config.in_path)
    series = impute_all(_select(parse_series_csv(config.in_path), config))
    with atomic_write(config.out_path) as fh:
        write_series_csv(series, fh)
    print(f"imputed {len(series)} series -> {config.out_path}")


def featurize_all(series, calendar, config):
    rows = []
    for s in series:
        rows += preprocess.extract_windows(s, calendar, config.stride, with_targets=True, max_rows=config.max_rows)
    return rows


def cmd_featurize(config):
    _need(config, "in", "holidays", "out")
    _need_files(config.in_path, config.holidays)
    calendar = parse_holidays(config.holidays)
    series = _load_complete_series(config)
    rows = featurize_all(series, calendar, config)
    with atomic_write(config.out_path) as fh:
        preprocess.write_features(rows, fh)
    print(f"{len(rows)} rows -> {config.out_path}")


def _write_model_outputs(model, report, config):
    save_model(model, config.out_path)
    log_path = config.train_log or config.out_path.with_name(config.out_path.name + ".log.csv")
    with atomic_write(log_path) as fh:
        write_train_log(report, fh)
    return log_path


def cmd_train(config):
    _need(config, "in", "out")
    _need_files(config.in_path, config.warm_start)
    rows = _select(preprocess.read_features(config.in_path), config, key=lambda r: (r.origin[1], r.origin[2]))
    if not rows:
        raise ValidationError(f"{config.in_path}: no feature rows match the indicator/tech selection")
    groups = {(r.origin[1], r.origin[2]) for r in rows}
    if len(groups) > 1:
        names = ", ".join(sorted(f"{i}/{t}" for i, t in groups))
        raise ValidationError(f"feature file mixes {names}; train one indicator x tech per run (--indicator/--tech)")
    if any(r.target is None for r in rows):
        raise ValidationError(f"{config.in_path}: feature rows lack targets")
    init = load_model(config.warm_start) if config.warm_start else None
    model, report = train(rows, config.train_config(), init=init)
    log_path = _write_model_outputs(model, report, config)
    final = f"{report.final_loss:.6f}" if report.epoch_losses else "n/a"
    print(f"trained on {len(rows)} rows, batch size {report.batch_size}, final loss {final} -> {config.out_path} (log {log_path})")


def forecast_grid(series, calendar, model) -> ForecastGrid:
    grid = ForecastGrid(_week_start(series))
    for s in series:
        try:
            row = preprocess.inference_row(s, calendar)
        except DegenerateRowError:
            grid[(s.cell_id, s.indicator, s.tech)] = np.zeros(preprocess.N_TARGET)
            continue
        grid[(s.cell_id, s.indicator, s.tech)] = preprocess.unscale(predict(model, row.inputs), row.scale)
    return grid


def cmd_predict(config):
    _need(config, "in", "holidays", "model", "out")
    _need_files(config.in_path, config.holidays, config.model)
    calendar = parse_holidays(config.holidays)
    model = load_model(config.model)
    series = _load_complete_series(config)
    evaluate.save_grid(forecast_grid(series, calendar, model), config.out_path)
    print(f"forecast for {len(series)} series -> {config.out_path}")


def baseline_grid(series, method, params) -> ForecastGrid:
    grid = ForecastGrid(_week_start(series))
    for s in series:
        if method == "naive":
            values = baselines.naive_forecast(s)
        else:
            values = baselines.rule_based_week(s, params=params)
        grid[(s.cell_id, s.indicator, s.tech)] = values
    return grid


def cmd_baseline(config):
    _need(config, "in", "out")
    _need_files(config.in_path)
    series = _load_complete_series(config)
    evaluate.save_grid(baseline_grid(series, config.method, config.rule_params()), config.out_path)
    print(f"{config.method} forecast for {len(series)} series -> {config.out_path}")


def _print_report(report, label=None):
    prefix = f"{label}: " if label else ""
    print(f"{prefix}weighted_mape={report.weighted_mape:.6f}")
    print(
        f"{prefix}mape_4g={report.mape_4g:.6f} mape_5g={report.mape_5g:.6f} "
        f"points={report.n_points_scored} skipped_zero_actual={report.n_points_skipped_zero_actual}"
    )


def cmd_evaluate(config):
    _need(config, "pred", "actual")
    _need_files(config.pred, config.actual)
    report = evaluate.evaluate_run(config.pred, config.actual, config.out_path)
    _print_report(report)


def run_pipeline(config) -> dict:
    """Run every stage in ``config.out_path`` and return the three reports."""
    work = Path(config.out_path)
    paths = synth.write_corpus(synth.generate(config.synth_config()), work / "data")
    calendar = parse_holidays(paths["holidays"])

    raw = parse_series_csv(paths["series"])
    series = impute_all(raw)
    with atomic_write(work / "imputed.csv") as fh:
        write_series_csv(series, fh)

    grids = {
        "dense_mlp": ForecastGrid(_week_start(series)),
        "naive": baseline_grid(series, "naive", None),
        "rule": baseline_grid(series, "rule", config.rule_params()),
    }
    indicators = sorted({s.indicator for s in series}, key=lambda i: i.value)
    for indicator in indicators:
        donor = None
        for tech in (Tech.FourG, Tech.FiveG):
            group = [s for s in series if s.indicator == indicator and s.tech == tech]
            if not group:
                continue
            rows = featurize_all(group, calendar, config)
            stem = f"{indicator.value}_{tech.value}"
            with atomic_write(work / f"features_{stem}.csv") as fh:
                preprocess.write_features(rows, fh)
            model, report = train(rows, config.train_config(), init=donor)
            model_cfg = dataclasses.replace(config, out_path=work / f"model_{stem}.bin", train_log=None)
            _write_model_outputs(model, report, model_cfg)
            log.info("%s: %d rows, final loss %.4f", stem, len(rows), report.final_loss)
            if tech == Tech.FourG:
                donor = model
            for key, values in forecast_grid(group, calendar, model).entries.items():
                grids["dense_mlp"][key] = values

    actual = evaluate.read_grid(paths["actual"])
    reports = {}
    for name, grid in grids.items():
        evaluate.save_grid(grid, work / f"forecast_{name}.csv")
        reports[name] = evaluate.weighted_mape(grid, actual)
        with atomic_write(work / f"breakdown_{name}.csv") as fh:
            evaluate.write_breakdown(reports[name], fh)
    with atomic_write(work / "summary.csv") as fh:
        fh.write("method,weighted_mape,mape_4g,mape_5g\n")
        for name, r in reports.items():
            fh.write(f"{name},{r.weighted_mape!r},{r.mape_4g!r},{r.mape_5g!r}\n")
    return reports


def cmd_pipeline(config):
    _need(config, "out")
    reports = run_pipeline(config)
    for name, report in reports.items():
        _print_report(report, name)


COMMANDS = {
    "synth": cmd_synth,
    "impute": cmd_impute,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "predict": cmd_predict,
    "baseline": cmd_baseline,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse signals usage errors with status 2; report them as bad input
        return 1 if exc.code == 2 else (exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        COMMANDS[args.command](config)
    except CellcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
