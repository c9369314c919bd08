"""Mini-batch training with linear learning-rate decay and early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError
from .losses import get_loss
from .optim import Adam

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    max_epochs: int
    batch_size: int = 32
    learning_rate: float = 1e-4
    patience: int = 30  # 0 stops after the first epoch without improvement
    split: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.patience < 0:
            raise ValueError(f"patience must be >= 0, got {self.patience}")
        if not 0.0 < self.split < 1.0:
            raise ValueError(f"split must lie in (0, 1), got {self.split}")


@dataclass
class TrainResult:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0
    epochs_run: int = 0
    stopped_early: bool = False


def _batched_loss(model, inputs, targets, loss_fn, batch_size):
    total = 0.0
    for start in range(0, len(inputs), batch_size):
        sl = slice(start, start + batch_size)
        pred = model.forward(inputs[sl], training=False)
        total += loss_fn(pred, targets[sl]) * (min(len(inputs), start + batch_size) - start)
    return total / len(inputs)


def train_model(model, inputs, targets, loss_kind, config):
    """Fit `model` to (inputs, targets); restores the best-validation weights.

    The learning rate decays linearly from its initial value to zero at
    `max_epochs`; training stops early once the validation loss has failed to
    improve for `patience` consecutive epochs. Returns a TrainResult.
    """
    inputs = np.asarray(inputs, dtype=np.float32)
    targets = np.asarray(targets, dtype=np.float32)
    n = len(inputs)
    if n == 0:
        raise ValueError("training requires a non-empty dataset")
    if len(targets) != n:
        raise ValueError(f"{n} inputs vs {len(targets)} targets")
    loss_fn, grad_fn = get_loss(loss_kind)

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    if n == 1:
        train_idx = val_idx = perm  # degenerate: validate on the single sample
    else:
        n_train = int(np.clip(round(config.split * n), 1, n - 1))
        train_idx, val_idx = perm[:n_train], perm[n_train:]

    opt = Adam()
    result = TrainResult()
    best = math.inf
    best_weights = None
    since = 0
    stop_after = max(config.patience, 1)

    for epoch in range(config.max_epochs):
        lr = config.learning_rate * (1.0 - epoch / config.max_epochs)
        order = rng.permutation(train_idx)
        running = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            pred = model.forward(inputs[idx], training=True)
            loss = loss_fn(pred, targets[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch} (value {loss})")
            model.backward(grad_fn(pred, targets[idx]))
            opt.step(model, lr)
            running += loss * len(idx)
        result.train_loss.append(running / len(order))

        vl = _batched_loss(model, inputs[val_idx], targets[val_idx], loss_fn, config.batch_size)
        if not math.isfinite(vl):
            raise TrainingError(f"validation loss diverged at epoch {epoch} (value {vl})")
        result.val_loss.append(vl)
        result.epochs_run = epoch + 1

        if vl < best:
            best = vl
            best_weights = model.get_weights()
            result.best_epoch = epoch
            since = 0
        else:
            since += 1
            if since >= stop_after:
                result.stopped_early = True
                break
        if epoch % 25 == 0:
            log.debug(
                "epoch %d: train %.3e val %.3e lr %.2e", epoch, result.train_loss[-1], vl, lr
            )

    if best_weights is not None:
        model.set_weights(best_weights)
    return result
