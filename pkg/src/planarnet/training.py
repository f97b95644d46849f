"""Batched perceptron-rule training and the mean-absolute-error metric.

Every pair in a batch is predicted with the weights from the start of that
batch; the summed per-pair deltas are applied afterward, unscaled, including
for a final partial batch.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .imaging import GrayImage, PolarImage
from .network import PlanarNetwork, _forward_flat

__all__ = [
    "TrainConfig",
    "TrainReport",
    "NumericError",
    "mean_abs_error",
    "batch_delta",
    "train",
    "write_report_csv",
]

CHAIN_LENGTHS = (1, 2, 5)


class NumericError(RuntimeError):
    """Raised when training produces non-finite weights."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 50
    epochs: int = 40
    seed: int = 0

    def __post_init__(self):
        # A zero rate is allowed (it trivially freezes the weights); negative is not.
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


@dataclass
class TrainReport:
    """Per-batch training error, per-epoch 1X test error, and final chained errors.

    ``probe_test_errors`` holds the 1X test error measured immediately after
    selected batch counts (batch 200 by default); a probe is absent when the
    run has fewer total batches.
    """

    batch_train_errors: list = field(default_factory=list)
    epoch_test_errors: list = field(default_factory=list)
    final_1x: float = math.nan
    final_2x: float = math.nan
    final_5x: float = math.nan

    probe_test_errors: dict = field(default_factory=dict)

    @property
    def final_errors(self) -> tuple:
        return (self.final_1x, self.final_2x, self.final_5x)


def _flat(image) -> np.ndarray:
    if isinstance(image, GrayImage):
        return image.pixels.ravel()
    if isinstance(image, PolarImage):
        return image.sectors.ravel()
    return np.asarray(image, dtype=np.float64).ravel()


def mean_abs_error(pred, target) -> float:
    """Mean over pixels of |pred - target|; images must match in shape."""
    a, b = _flat(pred), _flat(target)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).mean())


def _stack(images) -> np.ndarray:
    return np.stack([_flat(img) for img in images])


def _deltas(net: PlanarNetwork, x: np.ndarray, t: np.ndarray, rate: float):
    """Per-weight and per-bias deltas for a stacked batch, plus the error matrix."""
    gathered = x[:, net._idx]
    pred = np.clip(net._b + np.einsum("nk,bnk->bn", net._w, gathered), 0.0, 1.0)
    err = t - pred
    dw = rate * np.einsum("bn,bnk->nk", err, gathered) * net._mask
    db = rate * err.sum(axis=0)
    return dw, db, err


def batch_delta(net: PlanarNetwork, batch: Sequence, learning_rate: float):
    """Summed perceptron-rule deltas for a batch, without applying them.

    Every prediction uses the current (pre-update) weights.  The bias is
    treated as a weight on a constant unit input.  Returns (dw, db) where dw
    is padded like the network's weight array.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    x = _stack([pair.input for pair in batch])
    t = _stack([pair.target for pair in batch])
    dw, db, _ = _deltas(net, x, t, learning_rate)
    return dw, db


def _test_error_1x(net, x0, t1) -> float:
    return float(np.abs(_forward_flat(net, x0) - t1).mean())


def _chained_errors(net, x0, targets: dict) -> dict:
    out = {}
    pred = x0
    for step in range(1, max(targets) + 1):
        pred = _forward_flat(net, pred)
        if step in targets:
            out[step] = float(np.abs(pred - targets[step]).mean())
    return out


def train(
    net: PlanarNetwork,
    train_pairs: Sequence,
    eval_samples: Sequence,
    config: TrainConfig,
    probe_batches: tuple = (200,),
) -> TrainReport:
    """Run the batched perceptron rule in place and record the error trail.

    ``eval_samples`` may be chained evaluation samples (input plus targets for
    chain lengths 1, 2, 5) or plain input/target pairs (frame data), in which
    case only the 1X errors are available and the chained finals are NaN.
    """
    if not train_pairs:
        raise ValueError("train_pairs must be non-empty")
    x_train = _stack([p.input for p in train_pairs])
    t_train = _stack([p.target for p in train_pairs])

    x_eval = t_eval = None
    chained_targets: Optional[dict] = None
    if eval_samples:
        x_eval = _stack([s.input for s in eval_samples])
        if hasattr(eval_samples[0], "target_1"):
            chained_targets = {
                j: _stack([s.target(j) for s in eval_samples]) for j in CHAIN_LENGTHS
            }
            t_eval = chained_targets[1]
        else:
            t_eval = _stack([s.target for s in eval_samples])

    report = TrainReport()
    n_pairs = len(train_pairs)
    batches = 0
    for _ in range(config.epochs):
        for start in range(0, n_pairs, config.batch_size):
            stop = min(start + config.batch_size, n_pairs)
            dw, db, err = _deltas(
                net, x_train[start:stop], t_train[start:stop], config.learning_rate
            )
            report.batch_train_errors.append(float(np.abs(err).mean()))
            net._w += dw
            net._b += db
            batches += 1
            if batches in probe_batches and x_eval is not None:
                report.probe_test_errors[batches] = _test_error_1x(net, x_eval, t_eval)
        if not (np.all(np.isfinite(net._w)) and np.all(np.isfinite(net._b))):
            raise NumericError(f"non-finite weights after {batches} batches")
        if x_eval is not None:
            report.epoch_test_errors.append(_test_error_1x(net, x_eval, t_eval))

    if x_eval is not None:
        if chained_targets is not None:
            finals = _chained_errors(net, x_eval, chained_targets)
            report.final_1x, report.final_2x, report.final_5x = (
                finals[1], finals[2], finals[5],
            )
        else:
            report.final_1x = _test_error_1x(net, x_eval, t_eval)
    return report


def write_report_csv(report: TrainReport, path) -> None:
    """Long-format CSV: series,index,value covering batch, epoch and final errors."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "index", "value"])
        for i, err in enumerate(report.batch_train_errors):
            writer.writerow(["batch_train", i + 1, repr(err)])
        for i, err in enumerate(report.epoch_test_errors):
            writer.writerow(["epoch_test_1x", i + 1, repr(err)])
        for batch, err in sorted(report.probe_test_errors.items()):
            writer.writerow(["batch_test_1x", batch, repr(err)])
        writer.writerow(["final_1x", "", repr(report.final_1x)])
        writer.writerow(["final_2x", "", repr(report.final_2x)])
        writer.writerow(["final_5x", "", repr(report.final_5x)])
