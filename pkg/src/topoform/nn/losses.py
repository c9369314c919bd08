"""Scalar losses with analytic gradients w.r.t. predictions."""

from __future__ import annotations

import numpy as np

BCE_CLIP = 1e-7


def bce(pred, target):
    """Mean binary cross-entropy; predictions clipped to [1e-7, 1-1e-7]."""
    p = np.clip(pred, BCE_CLIP, 1.0 - BCE_CLIP)
    return float(-np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)))


def bce_grad(pred, target):
    p = np.clip(pred, BCE_CLIP, 1.0 - BCE_CLIP)
    g = (-target / p + (1.0 - target) / (1.0 - p)) / pred.size
    # clipped predictions sit on a flat spot of the loss
    inside = (pred > BCE_CLIP) & (pred < 1.0 - BCE_CLIP)
    return np.where(inside, g, 0.0)


def mse(pred, target):
    d = pred - target
    return float(np.mean(d * d))


def mse_grad(pred, target):
    return 2.0 * (pred - target) / pred.size


LOSSES = {"bce": (bce, bce_grad), "mse": (mse, mse_grad)}


def get_loss(kind):
    if kind not in LOSSES:
        raise ValueError(f"unknown loss kind {kind!r}; expected one of {sorted(LOSSES)}")
    return LOSSES[kind]
