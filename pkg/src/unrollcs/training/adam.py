from __future__ import annotations

import numpy as np


def adam_step(params: dict, grads: dict, m: dict, v: dict, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8, t: int = 1):
    """One bias-corrected Adam update; returns new (params, m, v) dicts."""
    if t < 1:
        raise ValueError("Adam step counter starts at 1")
    new_p, new_m, new_v = {}, {}, {}
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for k, p in params.items():
        g = grads[k]
        mk = beta1 * m[k] + (1.0 - beta1) * g
        vk = beta2 * v[k] + (1.0 - beta2) * g * g
        new_p[k] = p - lr * (mk / c1) / (np.sqrt(vk / c2) + eps)
        new_m[k], new_v[k] = mk, vk
    return new_p, new_m, new_v


class Adam:
    def __init__(self, params: dict, lr: float = 2e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p) for k, p in params.items()}
        self.v = {k: np.zeros_like(p) for k, p in params.items()}

    def step(self, params: dict, grads: dict, lr: float | None = None) -> dict:
        self.t += 1
        params, self.m, self.v = adam_step(params, grads, self.m, self.v,
                                           self.lr if lr is None else lr,
                                           self.beta1, self.beta2, self.eps, self.t)
        return params
