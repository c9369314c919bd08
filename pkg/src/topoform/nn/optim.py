"""Adam optimizer over a model's parameter dictionaries."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {}
        self._v = {}

    def step(self, model, lr):
        """Apply one update from the gradients currently stored on the model.

        Parameters without a gradient entry (batch-norm running statistics)
        are left untouched.
        """
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for layer in model.layers:
            for key, grad in layer.grads.items():
                slot = (layer.name, key)
                m = self._m.get(slot)
                if m is None:
                    m = np.zeros_like(grad)
                    self._v[slot] = np.zeros_like(grad)
                v = self._v[slot]
                m = b1 * m + (1 - b1) * grad
                v = b2 * v + (1 - b2) * grad * grad
                self._m[slot] = m
                self._v[slot] = v
                update = lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
                layer.params[key] = layer.params[key] - update
