"""Model builders: convolutional autoencoders and the latent regressor.

The autoencoder stacks n convolutional units on the way down (two convs per
unit; every unit except the deepest is followed by 2x max pooling and batch
norm), flattens into a linear bottleneck, then mirrors back up with
transposed convolutions. Odd grid extents survive pooling via ceil mode, and
the decoder output is cropped back to the grid when the doubled sizes
overshoot. The regressor maps problem parameters to the bottleneck space
through ReLU hidden layers separated by batch norm.
"""

from __future__ import annotations

import numpy as np

from .layers import BatchNorm, Conv, ConvTranspose, Crop, Dense, Flatten, MaxPool, Reshape
from .model import Model

REFERENCE_UNITS = (128, 64, 32, 32)
REFERENCE_HIDDEN = (720, 720)
LATENT_SIZE = 40

# one conv unit (32 channels, deepest level) added / removed
AE_VARIANT_UNITS = {
    "ref": REFERENCE_UNITS,
    "plus": REFERENCE_UNITS + (32,),
    "minus": REFERENCE_UNITS[:-1],
}
# one hidden (720 + batch norm) pair added / removed
FC_VARIANT_HIDDEN = {
    "ref": REFERENCE_HIDDEN,
    "plus": REFERENCE_HIDDEN + (720,),
    "minus": REFERENCE_HIDDEN[:-1],
}

FIELD_HEADS = {"density": "sigmoid", "vm": "sigmoid", "tc": "none"}


def _ceil_half(shape):
    return tuple(-(-s // 2) for s in shape)


def build_autoencoder(grid_dims, head="sigmoid", units=REFERENCE_UNITS, latent=LATENT_SIZE):
    """Autoencoder over a (nx, ny[, nz]) grid of one scalar channel.

    The returned model carries a ``bottleneck`` attribute: the layer count of
    the encoder half, usable as the stop/start index in Model.forward.
    """
    grid = tuple(int(g) for g in grid_dims)
    if len(grid) not in (2, 3) or any(g < 1 for g in grid):
        raise ValueError(f"grid_dims must be 2 or 3 positive extents, got {grid_dims}")
    units = tuple(int(u) for u in units)
    if len(units) < 2:
        raise ValueError("need at least two convolutional units")

    stack = []
    for i, c in enumerate(units):
        stack += [Conv(f"enc{i + 1}a", c), Conv(f"enc{i + 1}b", c)]
        if i < len(units) - 1:
            stack += [MaxPool(f"pool{i + 1}"), BatchNorm(f"enc_bn{i + 1}")]
    stack += [Flatten("flatten"), Dense("latent", latent, "none")]
    n_encoder = len(stack)

    deep = grid
    for _ in range(len(units) - 1):
        deep = _ceil_half(deep)
    flat = int(np.prod(deep)) * units[-1]
    stack += [
        Dense("dec_dense", flat, "relu"),
        Reshape("dec_reshape", deep + (units[-1],)),
        BatchNorm("dec_bn0"),
    ]
    rev = units[::-1]
    for j in range(len(units) - 1):
        stack += [
            Conv(f"dec{j + 1}a", rev[j]),
            Conv(f"dec{j + 1}b", rev[j]),
            ConvTranspose(f"up{j + 1}", rev[j + 1]),
            BatchNorm(f"dec_bn{j + 1}"),
        ]
    stack += [
        Conv("dec_topa", units[0]),
        Conv("dec_topb", units[0]),
        Conv("head", 1, head),
    ]
    doubled = tuple(d * 2 ** (len(units) - 1) for d in deep)
    if doubled != grid:
        margins = []
        for o, g in zip(doubled, grid):
            total = o - g
            margins.append((total // 2, total - total // 2))
        stack.append(Crop("crop", margins))

    model = Model(stack, grid + (1,))
    model.bottleneck = n_encoder
    return model


def build_regressor(n_par, latent=LATENT_SIZE, hidden=REFERENCE_HIDDEN):
    """Parameters -> latent vector regressor."""
    n_par = int(n_par)
    if n_par < 1:
        raise ValueError(f"n_par must be positive, got {n_par}")
    stack = []
    for i, h in enumerate(hidden):
        stack += [Dense(f"fc{i + 1}", h, "relu"), BatchNorm(f"fc_bn{i + 1}")]
    stack.append(Dense("out", latent, "none"))
    return Model(stack, (n_par,))


def autoencoder_for_field(grid_dims, field, variant="ref", units=None, latent=LATENT_SIZE):
    """Variant-aware builder with the output activation fixed by field kind."""
    if field not in FIELD_HEADS:
        raise ValueError(f"unknown field kind {field!r}")
    if units is None:
        units = AE_VARIANT_UNITS[variant]
    return build_autoencoder(grid_dims, head=FIELD_HEADS[field], units=units, latent=latent)


def regressor_variant(n_par, variant="ref", hidden=None, latent=LATENT_SIZE):
    if hidden is None:
        hidden = FC_VARIANT_HIDDEN[variant]
    return build_regressor(n_par, latent=latent, hidden=hidden)
