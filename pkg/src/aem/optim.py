"""Adam optimizer and gradient clipping."""

from __future__ import annotations

import numpy as np

from .params import ParamStore


class Adam:
    """Bias-corrected Adam over a ParamStore.

    Moments live per parameter name; the shared step counter t advances
    by exactly 1 per step() call. After a step, grads are reset to zero
    in place so the next backward accumulates from zero.
    """

    def __init__(self, store: ParamStore, lr: float = 0.002,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = {name: np.zeros_like(p.values) for name, p in store.items()}
        self.v = {name: np.zeros_like(p.values) for name, p in store.items()}

    def step(self) -> None:
        for name, p in self.store.items():
            if p.grad is None:
                raise ValueError(f"parameter {name!r} has no gradient")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.store.items():
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.values -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.epsilon)
            g[...] = 0.0


def clip_grad_norm(store: ParamStore, max_norm: float) -> float:
    """Scale all grads so their global L2 norm is at most max_norm.
    Returns the pre-clip norm."""
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    total = 0.0
    for name, p in store.items():
        if p.grad is None:
            raise ValueError(f"parameter {name!r} has no gradient")
        total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm:
        factor = max_norm / norm
        for _, p in store.items():
            p.grad *= factor
    return norm
