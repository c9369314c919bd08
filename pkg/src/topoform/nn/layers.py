"""Neural-network layers on plain numpy arrays, channels last.

Tensors are (batch, *spatial, channels); float32 in normal use, float64 for
gradient checking (layers inherit the dtype of their inputs and weights).
Convolutions are kernel-3 stride-1 with same padding, implemented as a sum of
shifted GEMMs so no im2col blowup is materialized; transposed convolutions
are zero-stuffed stride-2 doublers; pooling is 2x ceil-mode max.
"""

from __future__ import annotations

import numpy as np

from ..errors import BuildError

KERNEL = 3  # all (transposed) convolutions use 3^d kernels


def _act_forward(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "sigmoid":
        # numerically stable split form
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if activation == "none":
        return z
    raise BuildError(f"unknown activation {activation!r}")


def _act_backward(dy, y, activation):
    if activation == "relu":
        return dy * (y > 0)
    if activation == "sigmoid":
        return dy * y * (1.0 - y)
    return dy


def _kernel_offsets(ndim):
    grids = np.meshgrid(*([range(KERNEL)] * ndim), indexing="ij")
    return [tuple(int(g.flat[i]) for g in grids) for i in range(KERNEL**ndim)]


def _conv_same(x, w):
    """Stride-1 same-pad convolution via shifted tensordots.

    x: (B, *spatial, Ci); w: (*kernel, Ci, Co) -> (B, *spatial, Co).
    """
    nd = x.ndim - 2
    spatial = x.shape[1:-1]
    pad = [(0, 0)] + [(1, 1)] * nd + [(0, 0)]
    xp = np.pad(x, pad)
    out = None
    for off in _kernel_offsets(nd):
        sl = (slice(None),) + tuple(
            slice(o, o + s) for o, s in zip(off, spatial)
        ) + (slice(None),)
        term = np.tensordot(xp[sl], w[off], axes=([nd + 1], [0]))
        out = term if out is None else out + term
    return out


def _conv_same_backward(x, w, dy):
    """Gradients of _conv_same: returns (dx, dw)."""
    nd = x.ndim - 2
    spatial = x.shape[1:-1]
    pad = [(0, 0)] + [(1, 1)] * nd + [(0, 0)]
    xp = np.pad(x, pad)
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    sum_axes = tuple(range(nd + 1))  # batch + spatial
    for off in _kernel_offsets(nd):
        sl = (slice(None),) + tuple(
            slice(o, o + s) for o, s in zip(off, spatial)
        ) + (slice(None),)
        dw[off] = np.tensordot(xp[sl], dy, axes=(sum_axes, sum_axes))
        dxp[sl] += np.tensordot(dy, w[off], axes=([nd + 1], [1]))
    crop = (slice(None),) + tuple(slice(1, 1 + s) for s in spatial) + (slice(None),)
    return dxp[crop], dw


class Layer:
    """Base layer: subclasses fill params/grads dicts keyed by weight name."""

    def __init__(self, name):
        self.name = name
        self.params = {}
        self.grads = {}

    def build(self, in_shape):
        """Validate in_shape (no batch axis) and return the output shape."""
        raise NotImplementedError

    def forward(self, x, training=False):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def descriptor(self) -> str:
        raise NotImplementedError

    def init_weights(self, rng):
        pass

    def astype(self, dtype):
        for k in self.params:
            self.params[k] = self.params[k].astype(dtype)

    def _fail(self, msg):
        raise BuildError(f"layer {self.name}: {msg}")


def _xavier(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv(Layer):
    def __init__(self, name, channels, activation="relu"):
        super().__init__(name)
        self.channels = int(channels)
        self.activation = activation

    def build(self, in_shape):
        if len(in_shape) not in (3, 4):
            self._fail(f"expects a spatial input with channels, got shape {in_shape}")
        nd = len(in_shape) - 1
        ci = in_shape[-1]
        wshape = (KERNEL,) * nd + (ci, self.channels)
        self.params = {
            "w": np.zeros(wshape, dtype=np.float32),
            "b": np.zeros(self.channels, dtype=np.float32),
        }
        self.in_shape = in_shape
        return in_shape[:-1] + (self.channels,)

    def init_weights(self, rng):
        w = self.params["w"]
        k = int(np.prod(w.shape[:-2]))
        self.params["w"] = _xavier(
            rng, w.shape, k * w.shape[-2], k * w.shape[-1], w.dtype
        )

    def forward(self, x, training=False):
        if x.shape[1:] != self.in_shape:
            self._fail(f"expected input {self.in_shape}, got {x.shape[1:]}")
        self._x = x
        z = _conv_same(x, self.params["w"]) + self.params["b"]
        self._y = _act_forward(z, self.activation)
        return self._y

    def backward(self, dy):
        dz = _act_backward(dy, self._y, self.activation)
        dx, dw = _conv_same_backward(self._x, self.params["w"], dz)
        self.grads = {"w": dw, "b": dz.sum(axis=tuple(range(dz.ndim - 1)))}
        return dx

    def descriptor(self):
        return f"conv c={self.channels} act={self.activation}"


class ConvTranspose(Layer):
    """Stride-2 transposed convolution: output spatial size = 2x input.

    Implemented as zero-stuffing followed by a same-pad convolution with the
    spatially flipped kernel, which reproduces scatter-add (adjoint-of-
    strided-conv) semantics exactly.
    """

    def __init__(self, name, channels, activation="relu"):
        super().__init__(name)
        self.channels = int(channels)
        self.activation = activation

    def build(self, in_shape):
        if len(in_shape) not in (3, 4):
            self._fail(f"expects a spatial input with channels, got shape {in_shape}")
        nd = len(in_shape) - 1
        ci = in_shape[-1]
        wshape = (KERNEL,) * nd + (ci, self.channels)
        self.params = {
            "w": np.zeros(wshape, dtype=np.float32),
            "b": np.zeros(self.channels, dtype=np.float32),
        }
        self.in_shape = in_shape
        return tuple(2 * s for s in in_shape[:-1]) + (self.channels,)

    init_weights = Conv.init_weights

    def _stuff(self, x):
        spatial = x.shape[1:-1]
        z = np.zeros(
            (x.shape[0],) + tuple(2 * s for s in spatial) + (x.shape[-1],),
            dtype=x.dtype,
        )
        sl = (slice(None),) + tuple(slice(0, 2 * s, 2) for s in spatial) + (slice(None),)
        z[sl] = x
        return z, sl

    def forward(self, x, training=False):
        if x.shape[1:] != self.in_shape:
            self._fail(f"expected input {self.in_shape}, got {x.shape[1:]}")
        self._x = x
        zin, self._sl = self._stuff(x)
        self._zin = zin
        nd = x.ndim - 2
        wf = np.flip(self.params["w"], axis=tuple(range(nd)))
        z = _conv_same(zin, wf) + self.params["b"]
        self._y = _act_forward(z, self.activation)
        return self._y

    def backward(self, dy):
        nd = self._x.ndim - 2
        spatial_axes = tuple(range(nd))
        dz = _act_backward(dy, self._y, self.activation)
        wf = np.flip(self.params["w"], axis=spatial_axes)
        dzin, dwf = _conv_same_backward(self._zin, wf, dz)
        self.grads = {
            "w": np.flip(dwf, axis=spatial_axes),
            "b": dz.sum(axis=tuple(range(dz.ndim - 1))),
        }
        return dzin[self._sl]

    def descriptor(self):
        return f"convt c={self.channels} act={self.activation}"


class MaxPool(Layer):
    """2x max pooling, ceil mode: odd trailing edges keep a 1-wide window."""

    def __init__(self, name):
        super().__init__(name)

    def build(self, in_shape):
        if len(in_shape) not in (3, 4):
            self._fail(f"expects a spatial input with channels, got shape {in_shape}")
        self.in_shape = in_shape
        return tuple(-(-s // 2) for s in in_shape[:-1]) + (in_shape[-1],)

    def forward(self, x, training=False):
        spatial = x.shape[1:-1]
        padded = tuple(-(-s // 2) * 2 for s in spatial)
        pad = [(0, 0)] + [(0, p - s) for p, s in zip(padded, spatial)] + [(0, 0)]
        xp = np.pad(x, pad, constant_values=-np.inf)
        shape = [x.shape[0]]
        for p in padded:
            shape += [p // 2, 2]
        shape.append(x.shape[-1])
        blocks = xp.reshape(shape)
        axes = tuple(2 + 2 * i for i in range(len(spatial)))
        y = blocks.max(axis=axes)
        expand = y
        for ax in axes:
            expand = np.expand_dims(expand, ax)
        self._mask = blocks == expand
        self._xshape = x.shape
        self._pad_shape = xp.shape
        self._block_shape = shape
        self._axes = axes
        return y

    def backward(self, dy):
        expand = dy
        for ax in self._axes:
            expand = np.expand_dims(expand, ax)
        dblocks = np.where(self._mask, expand, 0.0)
        dxp = dblocks.reshape(self._pad_shape)
        crop = (slice(None),) + tuple(slice(0, s) for s in self._xshape[1:-1]) + (
            slice(None),
        )
        return np.ascontiguousarray(dxp[crop])

    def descriptor(self):
        return "pool"


class BatchNorm(Layer):
    """Channels-last batch normalization with running statistics.

    The running averages are accumulated in float64 (a float32 running
    average stalls ~1e-5 away from its fixed point); inference and
    serialization both consume the same float32-rounded view of them, so a
    saved model reproduces in-memory inference bit for bit.
    """

    def __init__(self, name, momentum=0.99, eps=1e-3):
        super().__init__(name)
        self.momentum = momentum
        self.eps = eps

    def build(self, in_shape):
        c = in_shape[-1]
        self.params = {
            "gamma": np.ones(c, dtype=np.float32),
            "beta": np.zeros(c, dtype=np.float32),
            "run_mean": np.zeros(c, dtype=np.float64),
            "run_var": np.ones(c, dtype=np.float64),
        }
        self.in_shape = in_shape
        return in_shape

    def astype(self, dtype):
        self.params["gamma"] = self.params["gamma"].astype(dtype)
        self.params["beta"] = self.params["beta"].astype(dtype)

    def forward(self, x, training=False):
        axes = tuple(range(x.ndim - 1))
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.params["run_mean"] = m * self.params["run_mean"] + (1 - m) * mean
            self.params["run_var"] = m * self.params["run_var"] + (1 - m) * var
        else:
            stat_dtype = np.promote_types(x.dtype, np.float32)
            mean = self.params["run_mean"].astype(stat_dtype)
            var = self.params["run_var"].astype(stat_dtype)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        self._training = training
        self._xhat = xhat
        self._inv = inv
        return self.params["gamma"] * xhat + self.params["beta"]

    def backward(self, dy):
        axes = tuple(range(dy.ndim - 1))
        xhat = self._xhat
        # running stats are forward-pass state, not trained parameters
        self.grads = {
            "gamma": (dy * xhat).sum(axis=axes),
            "beta": dy.sum(axis=axes),
        }
        g = self.params["gamma"] * self._inv
        if not self._training:
            return dy * g
        n = np.prod([dy.shape[a] for a in axes])
        mean_dy = dy.mean(axis=axes)
        mean_dy_xhat = (dy * xhat).mean(axis=axes)
        return g * (dy - mean_dy - xhat * mean_dy_xhat)

    def descriptor(self):
        return "bn"


class Dense(Layer):
    def __init__(self, name, units, activation="none"):
        super().__init__(name)
        self.units = int(units)
        self.activation = activation

    def build(self, in_shape):
        if len(in_shape) != 1:
            self._fail(f"expects a flat input, got shape {in_shape}")
        self.params = {
            "w": np.zeros((in_shape[0], self.units), dtype=np.float32),
            "b": np.zeros(self.units, dtype=np.float32),
        }
        self.in_shape = in_shape
        return (self.units,)

    def init_weights(self, rng):
        w = self.params["w"]
        self.params["w"] = _xavier(rng, w.shape, w.shape[0], w.shape[1], w.dtype)

    def forward(self, x, training=False):
        if x.shape[1:] != self.in_shape:
            self._fail(f"expected input {self.in_shape}, got {x.shape[1:]}")
        self._x = x
        z = x @ self.params["w"] + self.params["b"]
        self._y = _act_forward(z, self.activation)
        return self._y

    def backward(self, dy):
        dz = _act_backward(dy, self._y, self.activation)
        self.grads = {"w": self._x.T @ dz, "b": dz.sum(axis=0)}
        return dz @ self.params["w"].T

    def descriptor(self):
        return f"dense u={self.units} act={self.activation}"


class Flatten(Layer):
    def build(self, in_shape):
        self.in_shape = in_shape
        return (int(np.prod(in_shape)),)

    def forward(self, x, training=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)

    def descriptor(self):
        return "flatten"


class Reshape(Layer):
    def __init__(self, name, target):
        super().__init__(name)
        self.target = tuple(int(t) for t in target)

    def build(self, in_shape):
        if int(np.prod(in_shape)) != int(np.prod(self.target)):
            self._fail(
                f"cannot reshape {in_shape} ({int(np.prod(in_shape))} values) "
                f"into {self.target} ({int(np.prod(self.target))} values)"
            )
        self.in_shape = in_shape
        return self.target

    def forward(self, x, training=False):
        self._shape = x.shape
        return x.reshape((x.shape[0],) + self.target)

    def backward(self, dy):
        return dy.reshape(self._shape)

    def descriptor(self):
        return "reshape " + ",".join(str(t) for t in self.target)


class Crop(Layer):
    """Trim (before, after) cells per spatial axis; channels untouched."""

    def __init__(self, name, margins):
        super().__init__(name)
        self.margins = tuple((int(a), int(b)) for a, b in margins)

    def build(self, in_shape):
        if len(self.margins) != len(in_shape) - 1:
            self._fail(
                f"{len(self.margins)} margin pairs for {len(in_shape) - 1} "
                "spatial axes"
            )
        out = []
        for s, (a, b) in zip(in_shape[:-1], self.margins):
            if a + b >= s:
                self._fail(f"margins ({a},{b}) consume the whole axis of size {s}")
            out.append(s - a - b)
        self.in_shape = in_shape
        return tuple(out) + (in_shape[-1],)

    def forward(self, x, training=False):
        self._shape = x.shape
        sl = (slice(None),) + tuple(
            slice(a, s - b) for s, (a, b) in zip(x.shape[1:-1], self.margins)
        ) + (slice(None),)
        self._sl = sl
        return np.ascontiguousarray(x[sl])

    def backward(self, dy):
        dx = np.zeros(self._shape, dtype=dy.dtype)
        dx[self._sl] = dy
        return dx

    def descriptor(self):
        return "crop " + ",".join(f"{a}:{b}" for a, b in self.margins)
