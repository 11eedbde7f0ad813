"""Time the compiled kernels against the numpy ones.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--rows 256]

Reports the best of ``--repeat`` runs for the loss kernel, the imputation
kernel and one full training epoch with each backend plugged in.
"""

import argparse
import importlib
import timeit

import numpy as np

from cellcast import _pykernels, kernels
from cellcast.model import TrainConfig, train_arrays


def best_of(fn, repeat, number=1):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--rows", type=int, default=256, help="batch rows for the loss kernel")
    parser.add_argument("--weeks", type=int, default=52, help="series length for the imputation kernel")
    parser.add_argument("--train-rows", type=int, default=512)
    parser.add_argument("--d-hidden", type=int, default=256)
    args = parser.parse_args(argv)

    try:
        ckernels = importlib.import_module("cellcast._ckernels")
    except ImportError:
        print("compiled extension not built; only the numpy backend is timed")
        ckernels = None
    backends = {"numpy": _pykernels}
    if ckernels is not None:
        backends["cython"] = ckernels

    rng = np.random.default_rng(0)
    pred = rng.uniform(0, 3, (args.rows, 168))
    actual = rng.uniform(0, 3, (args.rows, 168))
    actual[rng.random(actual.shape) < 0.02] = 0.0
    series = rng.uniform(0, 100, args.weeks * 168)
    series[rng.random(series.size) < 0.05] = np.nan
    x = rng.uniform(0, 2, (args.train_rows, 532))
    y = rng.uniform(0.1, 2, (args.train_rows, 168))
    config = TrainConfig(epochs=1, batch_candidates=(256,), d_hidden=args.d_hidden, lr0=0.005)

    results = {}
    saved = kernels.combined_error, kernels.impute_weekly
    try:
        for name, mod in backends.items():
            kernels.combined_error, kernels.impute_weekly = mod.combined_error, mod.impute_weekly
            results[name] = (
                best_of(lambda: mod.combined_error(pred, actual), args.repeat, number=20),
                best_of(lambda: mod.impute_weekly(series, 168), args.repeat, number=5),
                best_of(lambda: train_arrays(x, y, config), args.repeat),
            )
    finally:
        kernels.combined_error, kernels.impute_weekly = saved

    labels = (
        f"combined_error {args.rows}x168",
        f"impute_weekly {args.weeks} weeks",
        f"train epoch {args.train_rows} rows, d_hidden {args.d_hidden}",
    )
    print(f"{'kernel':<40}" + "".join(f"{n:>12}" for n in results) + ("     speedup" if len(results) == 2 else ""))
    for i, label in enumerate(labels):
        times = [results[n][i] for n in results]
        row = f"{label:<40}" + "".join(f"{t * 1e3:>10.3f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>11.2f}x"
        print(row)


if __name__ == "__main__":
    main()
