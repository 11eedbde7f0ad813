"""The twelve numbered acceptance criteria.

Each test carries an ``acceptance`` marker; the terminal summary prints
one PASS/FAIL line per criterion. Run just these with
``pytest tests/test_acceptance.py``.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from cellcast import cli
from cellcast.baselines import RuleParams, exp_smooth, naive_forecast, rule_based_week
from cellcast.config import read_config
from cellcast.evaluate import ForecastGrid, weighted_mape
from cellcast.ingest import CellSeries, HolidayCalendar, Indicator, Tech
from cellcast.model import (
    DenseMlpModel,
    TrainConfig,
    backward,
    combined_error,
    forward,
    load_model,
    loss,
    lr_at_epoch,
    predict,
    save_model,
    train,
)
from cellcast.preprocess import extract_windows, impute
from cellcast.synth import SynthConfig, generate
from conftest import MARCH_1
from oracles import finite_difference_check, impute_oracle, plain_mlp

DESK_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "desk.cfg"


def detail(request, text):
    request.node.user_properties.append(("detail", text))


def _random_model(rng, d_in, d_hidden, d_out):
    shapes = {
        "W1": (d_in, d_hidden),
        "W2": (d_in, d_hidden),
        "W3": (d_hidden, d_hidden),
        "W4": (d_in, d_out),
        "W5": (d_hidden, d_out),
        "W6": (d_hidden, d_out),
    }
    return DenseMlpModel(**{k: rng.normal(0, 1, s) for k, s in shapes.items()})


@pytest.mark.acceptance(1, "backward matches central differences on 100 random pairs")
def test_gradient_correctness(request):
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    worst, checked, skipped = 0.0, 0, 0
    for _ in range(100):
        m = _random_model(rng, 6, 8, 4)
        x = rng.uniform(0, 2, (1, 6))
        actual = rng.uniform(0.05, 3, (1, 4))
        out, cache = forward(m, x)
        grads = backward(m, cache, out, actual)
        coords = [
            (name, tuple(int(rng.integers(0, d)) for d in m.params()[name].shape))
            for name in m.params()
            for _ in range(3)
        ]
        rel, n_skip = finite_difference_check(m.params(), grads, x, actual, coords, h=1e-5, kink_tol=1e-6)
        worst = max([worst, *rel])
        checked += len(rel)
        skipped += n_skip
    elapsed = time.perf_counter() - started
    detail(request, f"worst rel err {worst:.1e} over {checked} coords, {skipped} near kinks, {elapsed:.2f}s")
    assert checked > 0.9 * 1800
    assert worst <= 1e-3
    assert elapsed < 10


@pytest.mark.acceptance(2, "forward pass toy cases and plain-MLP reduction")
def test_forward_oracle():
    ones = DenseMlpModel(*(np.ones((1, 1)) for _ in range(6)))
    assert predict(ones, [3.0])[0] == 3.0
    assert predict(ones, [-2.0])[0] == 0.0
    rng = np.random.default_rng(7)
    for _ in range(50):
        m = _random_model(rng, 6, 8, 4)
        for name in ("W2", "W4", "W5"):
            m.params()[name][:] = 0.0
        x = rng.normal(size=6)
        expected = plain_mlp(x, m.W1.tolist(), m.W3.tolist(), m.W6.tolist())
        np.testing.assert_allclose(predict(m, x), expected, rtol=1e-12, atol=1e-12)


@pytest.mark.acceptance(3, "loss hand cases and scale invariance")
def test_loss_oracle(request):
    assert combined_error([15.0, 10.0], [10.0, 10.0])[0] == 50.0
    assert combined_error([5.0, 19.0], [1.0, 19.0])[0] == 40.0
    rng = np.random.default_rng(8)
    worst = 0.0
    for k in (0.1, 3.0, 100.0):
        for _ in range(1000):
            p = rng.uniform(0, 4, 168)
            a = rng.uniform(0, 3, 168)
            base = loss(p, a)
            worst = max(worst, abs(loss(k * p, k * a) - base) / base)
    detail(request, f"worst rel deviation {worst:.1e}")
    assert worst <= 1e-12


@pytest.mark.acceptance(4, "learning-rate schedule endpoints")
def test_schedule():
    assert lr_at_epoch(0.0005, 128, 0) == 0.0005
    assert lr_at_epoch(0.0005, 128, 127) == 3.90625e-6


def _imputation_case():
    values = np.full(31 * 24, 50.0)
    hole = 9 * 24 + 5
    neighbours = {2: 3.0, 16: 7.0, 23: 11.0, 30: 13.0}
    values[hole] = np.nan
    for day, v in neighbours.items():
        values[day * 24 + 5] = v
    return values, hole


@pytest.mark.acceptance(5, "imputation matches weighted oracle; fills are idempotent and within neighbour range")
def test_imputation_oracle():
    values, hole = _imputation_case()
    s = CellSeries("c", Tech.FourG, Indicator.PDSCH, MARCH_1, values)
    got = impute(s).values[hole]
    weighted = (3.0 * 1 + 7.0 * 1 + 11.0 / 2 + 13.0 / 3) / (1 + 1 + 1 / 2 + 1 / 3)
    assert abs(got - impute_oracle(list(values), MARCH_1)[hole]) <= 1e-9
    assert abs(got - weighted) <= 1e-9

    rng = np.random.default_rng(9)
    fuzzed = 0
    while fuzzed < 1000:
        weeks = int(rng.integers(2, 6))
        raw = rng.uniform(0, 100, weeks * 168)
        raw[rng.random(raw.size) < rng.uniform(0, 0.5)] = np.nan
        phases = np.isnan(raw.reshape(weeks, 168)).all(axis=0)
        if phases.any():
            continue
        fuzzed += 1
        once = impute(CellSeries("c", Tech.FourG, Indicator.PDSCH, MARCH_1, raw))
        assert impute(once) == once
        for i in np.flatnonzero(np.isnan(raw)):
            same = raw[i % 168 :: 168]
            same = same[~np.isnan(same)]
            assert same.min() <= once.values[i] <= same.max()


@pytest.mark.acceptance(6, "31-day series gives 4 windows of 532 inputs, 168 targets, unit history mean")
def test_featurization():
    values = np.random.default_rng(10).uniform(1, 50, 31 * 24)
    s = CellSeries("c", Tech.FourG, Indicator.PDSCH, MARCH_1, values)
    rows = extract_windows(s, HolidayCalendar(), stride_days=1)
    assert len(rows) == 4
    for r in rows:
        assert r.inputs.shape == (532,)
        assert r.target.shape == (168,)
        assert abs(r.scaled_history.mean() - 1.0) <= 1e-9


@pytest.mark.acceptance(7, "metric tech blend and day-weight hand case; uniform APE scores as itself")
def test_metric():
    rng = np.random.default_rng(11)
    pred, actual = ForecastGrid(MARCH_1), ForecastGrid(MARCH_1)
    for i, tech in enumerate([Tech.FourG] * 3 + [Tech.FiveG] * 2):
        a = rng.uniform(1, 10, 168)
        actual[(f"c{i}", Indicator.PDSCH, tech)] = a
        pred[(f"c{i}", Indicator.PDSCH, tech)] = np.abs(a + rng.normal(0, 2, 168))
    r = weighted_mape(pred, actual)
    assert abs(r.weighted_mape - (0.7 * r.mape_4g + 0.3 * r.mape_5g)) <= 1e-12

    a = np.full(168, 10.0)
    p = a.copy()
    p[:24] = 11.0
    key = ("c", Indicator.PDSCH, Tech.FourG)
    one_pred, one_actual = ForecastGrid(MARCH_1), ForecastGrid(MARCH_1)
    one_pred[key], one_actual[key] = p, a
    assert abs(100 * weighted_mape(one_pred, one_actual).weighted_mape - 1.6667) <= 1e-4
    assert abs(weighted_mape(one_pred, one_actual).weighted_mape - 2.88 / 172.8) <= 1e-6

    for e in (0.0, 0.1, 0.5):
        uniform = ForecastGrid(MARCH_1)
        for k, v in actual.entries.items():
            uniform[k] = v * (1 + e * rng.choice([-1.0, 1.0], 168))
        assert weighted_mape(uniform, actual).weighted_mape == pytest.approx(e, rel=1e-12, abs=1e-15)


@pytest.mark.acceptance(8, "baseline hand cases and weight isolation; naive scores 0 on periodic data")
def test_baselines():
    assert exp_smooth([10.0], 0.82) == 8.2
    assert exp_smooth([2.0, 4.0], 0.5) == 3.0

    rng = np.random.default_rng(12)
    values = rng.uniform(0, 10, 3 * 168)
    s = CellSeries("c", Tech.FourG, Indicator.PDSCH, MARCH_1, values)
    mean_only = rule_based_week(s, params=RuleParams(weights=(0, 0, 0, 1, 0, 0)))
    assert all(mean_only[h] == np.mean(values[h::168]) for h in range(168))
    pattern = rng.uniform(0, 10, 168)
    periodic = CellSeries("c", Tech.FourG, Indicator.PDSCH, MARCH_1, np.tile(pattern, 3))
    median_only = rule_based_week(periodic, params=RuleParams(weights=(0, 0, 0, 0, 0, 1)))
    np.testing.assert_array_equal(median_only, pattern)

    corpus = generate(SynthConfig(n_cells_4g=4, n_cells_5g=2, n_days=35, noise_sd=0, missing_rate=0, holiday_dates=()))
    pred = ForecastGrid(corpus.actual.week_start)
    for series in corpus.series:
        pred[(series.cell_id, series.indicator, series.tech)] = naive_forecast(series)
    assert weighted_mape(pred, corpus.actual).weighted_mape == 0.0


@pytest.mark.slow
@pytest.mark.acceptance(9, "desk benchmark: dense-MLP and rule-based both beat naive")
def test_end_to_end_benchmark(request, tmp_path):
    config = read_config(DESK_CONFIG)
    config.out_path = tmp_path
    started = time.perf_counter()
    reports = cli.run_pipeline(config.check())
    elapsed = time.perf_counter() - started
    scores = {name: r.weighted_mape for name, r in reports.items()}
    detail(
        request,
        f"naive {scores['naive']:.4f}, rule {scores['rule']:.4f}, dense-MLP {scores['dense_mlp']:.4f}, {elapsed:.0f}s",
    )
    assert scores["dense_mlp"] < scores["naive"]
    assert scores["rule"] < scores["naive"]
    assert elapsed < 15 * 60


def overfit_rows():
    corpus = generate(SynthConfig(n_cells_4g=8, n_cells_5g=0, n_days=35, missing_rate=0.0))
    rows = [extract_windows(s, corpus.calendar)[0] for s in corpus.series]
    assert len(rows) == 8
    return rows


OVERFIT = TrainConfig(epochs=128, lr0=0.005, batch_candidates=(8,), d_hidden=64, seed=0)


@pytest.mark.acceptance(10, "8-row overfit: final CE < 5, 10-epoch windows non-increasing, deterministic")
def test_training_sanity(request):
    rows = overfit_rows()
    model, report = train(rows, OVERFIT)
    inputs = np.stack([r.inputs for r in rows])
    targets = np.stack([r.scaled_target for r in rows])
    final_ce = float(np.mean(combined_error(predict(model, inputs), targets).mean(axis=1)))
    losses = report.epoch_losses
    # the 10-epoch moving average is non-increasing iff loss[e + 10] <= loss[e]
    rises = [e for e in range(len(losses) - 10) if losses[e + 10] > losses[e]]
    _, again = train(rows, OVERFIT)
    detail(request, f"final mean CE {final_ce:.2f}, {len(rises)} rising windows")
    assert final_ce < 5
    assert not rises
    assert again.epoch_losses == losses


@pytest.mark.acceptance(11, "full predict path is exactly homogeneous for c in {0.5, 2, 10}")
def test_homogeneity(request):
    corpus = generate(SynthConfig(n_cells_4g=6, n_cells_5g=0, n_days=35, seed=3))
    series = cli.impute_all(corpus.series)
    rows = [extract_windows(s, corpus.calendar)[0] for s in series]
    model, _ = train(rows, TrainConfig(epochs=20, lr0=0.005, batch_candidates=(8,), d_hidden=32))
    base = cli.forecast_grid(series, corpus.calendar, model)
    mismatched = {}
    for c in (0.5, 2.0, 10.0):
        scaled = cli.impute_all([s.with_values(s.values * c) for s in corpus.series])
        grid = cli.forecast_grid(scaled, corpus.calendar, model)
        expected = base.scaled(c)
        n_diff = sum(int(np.sum(grid[k] != expected[k])) for k in expected.keys())
        if n_diff:
            worst = max(float(np.max(np.abs(grid[k] - expected[k]) / expected[k].clip(1e-300))) for k in expected.keys())
            mismatched[c] = f"c={c:g}: {n_diff} of {6 * 168} values differ, worst rel {worst:.1e}"
    detail(request, "; ".join(mismatched.values()) or "bit-identical for every c")
    assert not mismatched


@pytest.mark.acceptance(12, "warm start: epochs=0 copies the donor, more epochs never end worse than cold")
def test_warm_start(request, tmp_path):
    corpus = generate(SynthConfig(n_cells_4g=10, n_cells_5g=0, n_days=42, seed=5))
    series = cli.impute_all(corpus.series)
    rows = [r for s in series for r in extract_windows(s, corpus.calendar, stride_days=2)]
    config = TrainConfig(epochs=30, lr0=0.005, batch_candidates=(16,), d_hidden=32, seed=1)
    donor, _ = train(rows, config)

    donor_path = tmp_path / "donor.bin"
    save_model(donor, donor_path)
    feat = tmp_path / "feat.csv"
    from cellcast.preprocess import write_features

    with feat.open("w", newline="") as fh:
        write_features(rows, fh)
    out = tmp_path / "copy.bin"
    assert cli.main(["train", "--in", str(feat), "--out", str(out), "--warm-start", str(donor_path), "--epochs", "0"]) == 0
    assert out.read_bytes() == donor_path.read_bytes()
    assert load_model(out) == donor

    _, warm = train(rows, config, init=donor)
    _, cold = train(rows, config)
    detail(request, f"warm final loss {warm.final_loss:.2f} vs cold {cold.final_loss:.2f}")
    assert warm.final_loss <= cold.final_loss
