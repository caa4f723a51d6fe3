"""Plain SGD with an optional momentum flag (default off)."""

import numpy as np


class Sgd:
    def __init__(self, params, lr, momentum=0.0):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self._velocity = [None] * len(self.params) if momentum else None

    def step(self):
        """p <- p - lr*g; grads are zeroed afterwards."""
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            if not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(
                    f"non-finite gradient for parameter {i} (shape {p.shape}); step aborted")
            g = p.grad
            if self.momentum:
                v = self._velocity[i]
                v = g.copy() if v is None else self.momentum * v + g
                self._velocity[i] = v
                g = v
            p.data -= (self.lr * g).astype(p.dtype)
        self.zero_grad()

    def zero_grad(self):
        for p in self.params:
            p.grad = None
