"""Sequential model: an ordered layer stack with fixed input shape."""

from __future__ import annotations

import numpy as np

from ..errors import BuildError, TrainingError
from . import layers as L


class Model:
    """Layers are built (shapes resolved, weights allocated) on construction;
    call :func:`xavier_init` or load a bundle before using the weights."""

    def __init__(self, layer_list, input_shape):
        self.layers = list(layer_list)
        self.input_shape = tuple(int(s) for s in input_shape)
        names = [ly.name for ly in self.layers]
        if len(set(names)) != len(names):
            raise BuildError(f"duplicate layer names: {names}")
        shape = self.input_shape
        self.shapes = [shape]
        for layer in self.layers:
            shape = layer.build(shape)
            self.shapes.append(shape)
        self.output_shape = shape

    # -- execution -----------------------------------------------------

    def forward(self, x, training=False, start=0, stop=None):
        """Run layers [start, stop). x must match the shape at `start`."""
        x = np.asarray(x)
        expect = self.shapes[start]
        if x.shape[1:] != expect:
            raise ValueError(
                f"model expects input of shape {expect} (plus batch), "
                f"got {x.shape}"
            )
        for layer in self.layers[start : stop if stop is not None else len(self.layers)]:
            x = layer.forward(x, training=training)
        return x

    def backward(self, dy):
        """Backpropagate from the last forward pass; fills layer grads."""
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
            for key, g in layer.grads.items():
                if not np.all(np.isfinite(g)):
                    raise TrainingError(
                        f"non-finite gradient for {key!r} in layer {layer.name}"
                    )
        return dy

    # -- parameter access ----------------------------------------------

    def parameters(self):
        """Yield (layer_name, key, array) for every parameter in order."""
        for layer in self.layers:
            for key in sorted(layer.params):
                yield layer.name, key, layer.params[key]

    def n_parameters(self):
        return sum(p.size for _, _, p in self.parameters())

    def get_weights(self):
        return [p.copy() for _, _, p in self.parameters()]

    def set_weights(self, weights):
        flat = list(weights)
        slots = [(ly, key) for ly in self.layers for key in sorted(ly.params)]
        if len(flat) != len(slots):
            raise ValueError(f"expected {len(slots)} arrays, got {len(flat)}")
        for (layer, key), arr in zip(slots, flat):
            cur = layer.params[key]
            if arr.shape != cur.shape:
                raise ValueError(
                    f"weight shape mismatch for {layer.name}/{key}: "
                    f"{arr.shape} vs {cur.shape}"
                )
            layer.params[key] = np.array(arr, dtype=cur.dtype)

    def astype(self, dtype):
        for layer in self.layers:
            layer.astype(dtype)
        return self

    def descriptors(self):
        return [layer.descriptor() for layer in self.layers]

    def layer_index(self, name):
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise KeyError(name)

    def summary(self):
        lines = [f"input {self.input_shape}"]
        for layer, shape in zip(self.layers, self.shapes[1:]):
            lines.append(f"{layer.name:<12} {layer.descriptor():<28} -> {shape}")
        return "\n".join(lines)


def xavier_init(model, seed):
    """Glorot-uniform weights (variance 2/(fan_in+fan_out)), zero biases.

    Layers draw from one generator in stack order, so a given seed fully
    determines the starting point.
    """
    rng = np.random.default_rng(seed)
    for layer in model.layers:
        layer.init_weights(rng)
    return model


def from_descriptors(descs, input_shape):
    """Rebuild a model from descriptor strings (inverse of descriptors())."""
    built = []
    for i, d in enumerate(descs):
        parts = d.split()
        kind = parts[0]
        kv = {}
        for p in parts[1:]:
            if "=" in p:
                k, v = p.split("=", 1)
                kv[k] = v
        name = f"{kind}{i}"
        if kind == "conv":
            built.append(L.Conv(name, int(kv["c"]), kv.get("act", "relu")))
        elif kind == "convt":
            built.append(L.ConvTranspose(name, int(kv["c"]), kv.get("act", "relu")))
        elif kind == "pool":
            built.append(L.MaxPool(name))
        elif kind == "bn":
            built.append(L.BatchNorm(name))
        elif kind == "dense":
            built.append(L.Dense(name, int(kv["u"]), kv.get("act", "none")))
        elif kind == "flatten":
            built.append(L.Flatten(name))
        elif kind == "reshape":
            built.append(L.Reshape(name, [int(t) for t in parts[1].split(",")]))
        elif kind == "crop":
            margins = [tuple(int(v) for v in m.split(":")) for m in parts[1].split(",")]
            built.append(L.Crop(name, margins))
        else:
            raise BuildError(f"unknown layer descriptor {d!r}")
    return Model(built, input_shape)
