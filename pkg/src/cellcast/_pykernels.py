"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them loop for loop.
"""

import numpy as np


def combined_error(pred, actual):
    """Per-row combined error and its gradient with respect to ``pred``.

    Parameters
    ----------
    pred, actual : ndarray, shape (n_rows, n_out)
        ``actual`` must be non-negative with a positive mean in every row.

    Returns
    -------
    ce_mean : ndarray, shape (n_rows,)
        Mean combined error (in percent) of each row; the row loss is its square.
    grad : ndarray, shape (n_rows, n_out)
        Derivative of each row loss with respect to each prediction.
    """
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    n_out = actual.shape[1]
    row_mean = actual.mean(axis=1, keepdims=True)
    diff = pred - actual
    ae = np.abs(diff)
    positive = actual > 0
    safe_actual = np.where(positive, actual, 1.0)
    ape = np.where(positive, 100.0 * ae / safe_actual, np.inf)
    use_ape = ape <= 100.0
    denom = np.where(use_ape, safe_actual, row_mean)
    ce = 100.0 * ae / denom
    ce_mean = ce.mean(axis=1)
    dce = 100.0 * np.sign(diff) / denom
    grad = (2.0 * ce_mean / n_out)[:, None] * dce
    return ce_mean, grad


def impute_weekly(values, period):
    """Fill NaNs with 1/k-weighted same-phase neighbours, k = period distance.

    Only originally present values are read. Each fill is clamped to the
    range of the present values in its phase. Returns ``(filled, bad_index)``
    where ``bad_index`` is the first missing position without any neighbour
    (``-1`` when every gap could be filled).
    """
    values = np.asarray(values, dtype=np.float64)
    out = values.copy()
    missing = np.isnan(values)
    if not missing.any():
        return out, -1
    bad = -1
    for phase in range(min(period, len(values))):
        sub = values[phase::period]
        sub_missing = np.isnan(sub)
        if not sub_missing.any():
            continue
        holes = np.flatnonzero(sub_missing)
        known = np.flatnonzero(~sub_missing)
        if known.size == 0:
            idx = phase + holes[0] * period
            bad = idx if bad < 0 else min(bad, idx)
            continue
        weights = 1.0 / np.abs(holes[:, None] - known[None, :])
        filled = (weights @ sub[known]) / weights.sum(axis=1)
        # rounding can push the mean a hair outside its inputs
        filled = np.clip(filled, sub[known].min(), sub[known].max())
        out[phase + holes * period] = filled
    return out, bad
