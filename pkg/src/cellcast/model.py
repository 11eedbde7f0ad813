"""Dense-MLP regressor with hand-written backprop and Adam training.

The network has two hidden layers and extra fully connected paths between
non-adjacent layers. Each layer averages its incoming paths::

    h1 = relu(x @ W1)
    h2 = relu(x @ W2 + h1 @ W3) / 2
    o  = relu((x @ W4 + h1 @ W5 + h2 @ W6) / 3)

There are no bias terms.
"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DegenerateRowError, ModelFormatError, TrainingError
from .fileio import atomic_write
from .preprocess import N_INPUTS, N_TARGET, stack_rows

log = logging.getLogger(__name__)

PARAM_NAMES = ("W1", "W2", "W3", "W4", "W5", "W6")
MAGIC = b"CCDMLP\x00\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIQQQ")


class DenseMlpModel:
    """The six weight matrices of a dense-MLP.

    Shapes are ``W1, W2: (d_in, d_hidden)``, ``W3: (d_hidden, d_hidden)``,
    ``W4: (d_in, d_out)`` and ``W5, W6: (d_hidden, d_out)``.
    """

    def __init__(self, W1, W2, W3, W4, W5, W6):
        self.W1, self.W2, self.W3, self.W4, self.W5, self.W6 = (
            np.ascontiguousarray(w, dtype=np.float64) for w in (W1, W2, W3, W4, W5, W6)
        )
        self._check()

    def _check(self):
        d_in, d_hidden = self.W1.shape
        d_out = self.W4.shape[1]
        expected = {
            "W1": (d_in, d_hidden),
            "W2": (d_in, d_hidden),
            "W3": (d_hidden, d_hidden),
            "W4": (d_in, d_out),
            "W5": (d_hidden, d_out),
            "W6": (d_hidden, d_out),
        }
        for name, shape in expected.items():
            w = getattr(self, name)
            if w.shape != shape:
                raise ValueError(f"{name} has shape {w.shape}, expected {shape}")
            if not np.all(np.isfinite(w)):
                raise ValueError(f"{name} has non-finite entries")

    @property
    def d_in(self) -> int:
        return self.W1.shape[0]

    @property
    def d_hidden(self) -> int:
        return self.W1.shape[1]

    @property
    def d_out(self) -> int:
        return self.W4.shape[1]

    @classmethod
    def zeros(cls, d_in=N_INPUTS, d_hidden=4096, d_out=N_TARGET):
        return cls(**{name: np.zeros(shape) for name, shape in _shapes(d_in, d_hidden, d_out).items()})

    @classmethod
    def initialize(cls, d_in=N_INPUTS, d_hidden=4096, d_out=N_TARGET, seed=0):
        """Uniform weights in ``+-1/sqrt(fan_in)`` from a seeded generator."""
        rng = np.random.default_rng(seed)
        weights = {}
        for name, shape in _shapes(d_in, d_hidden, d_out).items():
            bound = 1.0 / np.sqrt(shape[0])
            weights[name] = rng.uniform(-bound, bound, size=shape)
        return cls(**weights)

    def params(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "DenseMlpModel":
        return DenseMlpModel(**{name: w.copy() for name, w in self.params().items()})

    def __eq__(self, other):
        if not isinstance(other, DenseMlpModel):
            return NotImplemented
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in PARAM_NAMES)

    __hash__ = None

    def __repr__(self):
        return f"DenseMlpModel(d_in={self.d_in}, d_hidden={self.d_hidden}, d_out={self.d_out})"


def _shapes(d_in, d_hidden, d_out):
    return {
        "W1": (d_in, d_hidden),
        "W2": (d_in, d_hidden),
        "W3": (d_hidden, d_hidden),
        "W4": (d_in, d_out),
        "W5": (d_hidden, d_out),
        "W6": (d_hidden, d_out),
    }


def _as_batch(x, width, what):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.ndim != 2 or x.shape[1] != width:
        raise ValueError(f"{what} must have {width} columns, got shape {x.shape}")
    return x, single


def forward(model: DenseMlpModel, x, output_relu=True):
    """Run the network on one input vector or a batch of rows.

    Returns ``(output, cache)``. ``cache`` keeps the pre-activations needed
    by :func:`backward`. With ``output_relu=False`` the final ReLU is
    skipped (the training path, see :class:`TrainConfig`).
    """
    xb, single = _as_batch(x, model.d_in, "input")
    if not np.all(np.isfinite(xb)):
        raise ValueError("input has non-finite entries")
    a1 = xb @ model.W1
    h1 = np.maximum(a1, 0.0)
    a2 = xb @ model.W2 + h1 @ model.W3
    h2 = np.maximum(a2, 0.0) / 2.0
    a3 = (xb @ model.W4 + h1 @ model.W5 + h2 @ model.W6) / 3.0
    out = np.maximum(a3, 0.0) if output_relu else a3
    cache = {"x": xb, "a1": a1, "h1": h1, "a2": a2, "h2": h2, "a3": a3, "output_relu": output_relu, "single": single}
    return (out[0] if single else out), cache


def _check_actual(actual):
    if not np.all(np.isfinite(actual)) or np.any(actual < 0):
        raise ValueError("actual values must be finite and non-negative")
    if np.any(actual.mean(axis=1) <= 0):
        raise DegenerateRowError("a row of actual values has zero mean")


def combined_error(pred, actual) -> np.ndarray:
    """Per-element combined error in percent.

    Absolute percentage error where it is at most 100, otherwise the
    absolute error over the row mean of ``actual``. Zero actuals always
    take the second form.
    """
    pred, _ = _as_batch(pred, np.shape(actual)[-1], "pred")
    actual, single = _as_batch(actual, pred.shape[1], "actual")
    _check_actual(actual)
    ae = np.abs(actual - pred)
    row_mean = actual.mean(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ape = np.where(actual > 0, 100.0 * ae / actual, np.inf)
    uae = 100.0 * ae / row_mean
    ce = np.where(ape <= 100.0, ape, uae)
    return ce[0] if single else ce


def loss(pred, actual) -> float:
    """Squared mean combined error of a row, averaged over rows for a batch."""
    pred, _ = _as_batch(pred, np.shape(actual)[-1], "pred")
    actual, _ = _as_batch(actual, pred.shape[1], "actual")
    _check_actual(actual)
    ce_mean, _ = kernels.combined_error(pred, actual)
    return float(np.mean(ce_mean**2))


def backprop(model: DenseMlpModel, cache, d_out) -> dict:
    """Chain an output gradient back through the network to W1..W6."""
    x, h1, h2 = cache["x"], cache["h1"], cache["h2"]
    d_out = np.atleast_2d(d_out)
    if cache["output_relu"]:
        d_out = d_out * (cache["a3"] > 0)
    d3 = d_out / 3.0
    d2 = (d3 @ model.W6.T) * (cache["a2"] > 0) / 2.0
    d1 = (d3 @ model.W5.T + d2 @ model.W3.T) * (cache["a1"] > 0)
    return {
        "W1": x.T @ d1,
        "W2": x.T @ d2,
        "W3": h1.T @ d2,
        "W4": x.T @ d3,
        "W5": h1.T @ d3,
        "W6": h2.T @ d3,
    }


def backward(model: DenseMlpModel, cache, pred, actual) -> dict:
    """Gradient of :func:`loss` with respect to every weight matrix.

    ``cache`` and ``pred`` must come from the same :func:`forward` call.
    At kinks the subgradient picks 0 (for ReLU at 0 and ``|x|`` at 0).
    """
    pred, _ = _as_batch(pred, model.d_out, "pred")
    actual, _ = _as_batch(actual, model.d_out, "actual")
    _check_actual(actual)
    _, d_pred = kernels.combined_error(pred, actual)
    return backprop(model, cache, d_pred / len(actual))


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def fresh(cls, params: dict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict, grads: dict, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update.

    Arrays in ``params`` and ``state`` are updated in place (the hidden
    layer matrices are too large to copy every step) and returned.
    """
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def lr_at_epoch(lr0, epochs, e):
    """Linearly decaying rate: ``lr0`` at epoch 0, ``lr0/epochs`` at the last."""
    if not 0 <= e < epochs:
        raise ValueError(f"epoch {e} outside [0, {epochs})")
    return lr0 * (1.0 - e / epochs)


@dataclass
class TrainConfig:
    """Training hyper-parameters.

    ``relu_in_training`` controls whether the output ReLU is part of the
    training graph. It defaults to off: the ReLU is applied when predicting,
    and keeping it out of training stops output units that start negative
    from receiving zero gradient forever.
    """

    epochs: int = 128
    lr0: float = 0.0005
    batch_candidates: tuple = (8192, 16384)
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    d_hidden: int = 4096
    relu_in_training: bool = False

    def __post_init__(self):
        self.batch_candidates = tuple(int(b) for b in self.batch_candidates)
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if not self.batch_candidates or min(self.batch_candidates) < 1:
            raise ValueError("batch_candidates must be a non-empty list of positive sizes")
        if self.d_hidden < 1:
            raise ValueError("d_hidden must be positive")


@dataclass
class LossReport:
    epoch_losses: list = field(default_factory=list)
    lrs: list = field(default_factory=list)
    batch_size: int | None = None
    candidate_losses: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else float("nan")


def _run(model, inputs, targets, config, batch_size):
    rng = np.random.default_rng([config.seed, 1])
    state = AdamState.fresh(model.params())
    report = LossReport(batch_size=batch_size)
    n = len(inputs)
    for epoch in range(config.epochs):
        lr = lr_at_epoch(config.lr0, config.epochs, epoch)
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            xb, yb = inputs[idx], targets[idx]
            pred, cache = forward(model, xb, output_relu=config.relu_in_training)
            ce_mean, d_pred = kernels.combined_error(pred, yb)
            batch_loss = ce_mean**2
            if not np.all(np.isfinite(batch_loss)):
                raise TrainingError(f"non-finite loss at epoch {epoch} (batch size {batch_size})")
            total += float(batch_loss.sum())
            grads = backprop(model, cache, d_pred / len(idx))
            adam_step(model.params(), grads, state, lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
        report.epoch_losses.append(total / n)
        report.lrs.append(lr)
        log.debug("batch %d epoch %d lr %.6g loss %.6g", batch_size, epoch, lr, total / n)
    return model, report


def train_arrays(inputs, targets, config: TrainConfig, init: DenseMlpModel | None = None):
    """Train on stacked scaled inputs and scaled targets.

    One run per batch-size candidate, each from the same starting weights
    and shuffle seed; the run with the smallest final-epoch loss wins.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if len(inputs) == 0:
        raise TrainingError("no training rows")
    if len(inputs) != len(targets):
        raise TrainingError("inputs and targets differ in length")
    keep = targets.mean(axis=1) > 0
    if not keep.all():
        log.warning("dropping %d rows whose target week is all zero", int((~keep).sum()))
        inputs, targets = inputs[keep], targets[keep]
        if len(inputs) == 0:
            raise TrainingError("every training row has an all-zero target week")
    if init is not None:
        if init.d_in != inputs.shape[1] or init.d_out != targets.shape[1]:
            raise TrainingError(f"warm-start model {init!r} does not match the data")
        start = init
    else:
        start = DenseMlpModel.initialize(inputs.shape[1], config.d_hidden, targets.shape[1], seed=config.seed)
    if config.epochs == 0:
        return start.copy(), LossReport(batch_size=config.batch_candidates[0])

    best = None
    finals = {}
    for batch_size in config.batch_candidates:
        model, report = _run(start.copy(), inputs, targets, config, batch_size)
        finals[batch_size] = report.final_loss
        log.info("batch size %d: final loss %.6g", batch_size, report.final_loss)
        if best is None or report.final_loss < best[1].final_loss:
            best = (model, report)
    model, report = best
    report.candidate_losses = finals
    return model, report


def train(rows, config: TrainConfig, init: DenseMlpModel | None = None):
    """Train on sample rows that carry targets. Returns ``(model, LossReport)``."""
    rows = list(rows)
    if not rows:
        raise TrainingError("no training rows")
    inputs, targets, _ = stack_rows(rows)
    if targets is None:
        raise TrainingError("training rows must have targets")
    return train_arrays(inputs, targets, config, init)


def predict(model: DenseMlpModel, scaled_input) -> np.ndarray:
    out, _ = forward(model, scaled_input, output_relu=True)
    return out


def write_train_log(report: LossReport, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["epoch", "lr", "mean_loss"])
    for epoch, (lr, value) in enumerate(zip(report.lrs, report.epoch_losses)):
        writer.writerow([epoch, repr(lr), repr(value)])


def model_to_bytes(model: DenseMlpModel) -> bytes:
    """Binary model file: magic, version, dims, then W1..W6 as little-endian float64."""
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, model.d_in, model.d_hidden, model.d_out)]
    parts += [np.ascontiguousarray(w, dtype="<f8").tobytes() for w in model.params().values()]
    return b"".join(parts)


def model_from_bytes(data: bytes, expect_io=(N_INPUTS, N_TARGET)) -> DenseMlpModel:
    if len(data) < _HEADER.size:
        raise ModelFormatError("model file is truncated (incomplete header)")
    magic, version, d_in, d_hidden, d_out = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError("not a dense-MLP model file")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    if min(d_in, d_hidden, d_out) < 1:
        raise ModelFormatError("model dimensions must be positive")
    if expect_io is not None and (d_in, d_out) != tuple(expect_io):
        raise ModelFormatError(f"model has d_in={d_in}, d_out={d_out}; expected d_in={expect_io[0]}, d_out={expect_io[1]}")
    shapes = _shapes(d_in, d_hidden, d_out)
    size = sum(r * c for r, c in shapes.values()) * 8
    body = len(data) - _HEADER.size
    if body < size:
        raise ModelFormatError(f"model file is truncated ({body} of {size} payload bytes)")
    if body > size:
        raise ModelFormatError("model file has trailing bytes")
    weights = {}
    offset = _HEADER.size
    for name, (r, c) in shapes.items():
        weights[name] = np.frombuffer(data, dtype="<f8", count=r * c, offset=offset).reshape(r, c).astype(np.float64)
        offset += r * c * 8
    try:
        return DenseMlpModel(**weights)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None


def save_model(model: DenseMlpModel, path) -> None:
    with atomic_write(path, binary=True) as fh:
        fh.write(model_to_bytes(model))


def load_model(path, expect_io=(N_INPUTS, N_TARGET)) -> DenseMlpModel:
    """Read a model file. Pass ``expect_io=None`` to accept any input/output width."""
    return model_from_bytes(Path(path).read_bytes(), expect_io=expect_io)
