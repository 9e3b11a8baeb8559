"""Adam with bias correction; state is checkpointable."""

from __future__ import annotations

import numpy as np


def adam_step(p, g, m, v, t, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected update. Returns (new_p, new_m, new_v); t is the
    1-based step count after this update."""
    m = beta1 * m + (1.0 - beta1) * g
    v = beta2 * v + (1.0 - beta2) * (g * g)
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    return p - lr * mhat / (np.sqrt(vhat) + eps), m, v


class Adam:
    def __init__(self, params, lr=2e-5, beta1=0.9, beta2=0.999, eps=1e-8):
        # params: ordered list of (name, Tensor); order fixes reduction order
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self):
        self.t += 1
        for name, p in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            p.data, self.m[name], self.v[name] = adam_step(
                p.data, g, self.m[name], self.v[name], self.t,
                self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self):
        for _, p in self.params:
            p.grad = None

    def state_arrays(self):
        """Flat (name, array) records for checkpointing, step count included."""
        out = [("opt/t", np.array([float(self.t)]))]
        for name, _ in self.params:
            out.append((f"opt/m/{name}", self.m[name]))
            out.append((f"opt/v/{name}", self.v[name]))
        return out

    def load_state_arrays(self, records):
        self.t = int(records["opt/t"][0])
        for name, _ in self.params:
            self.m[name] = records[f"opt/m/{name}"].copy()
            self.v[name] = records[f"opt/v/{name}"].copy()
