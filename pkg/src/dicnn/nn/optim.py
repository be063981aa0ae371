"""Adam optimizer over named parameter arrays, updated in place."""

from __future__ import annotations

import numpy as np


class Adam:
    """First/second-moment adaptive steps with bias correction:

        m = b1*m + (1-b1)*g          mhat = m / (1 - b1^t)
        v = b2*v + (1-b2)*g^2        vhat = v / (1 - b2^t)
        p -= lr * mhat / (sqrt(vhat) + eps)
    """

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)  # [(name, array)], arrays updated in place
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in self.params}
        self.v = {name: np.zeros_like(arr) for name, arr in self.params}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, arr in self.params:
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            mhat = self.m[name] / (1 - self.beta1**self.t)
            vhat = self.v[name] / (1 - self.beta2**self.t)
            arr -= self.learning_rate * mhat / (np.sqrt(vhat) + self.eps)
