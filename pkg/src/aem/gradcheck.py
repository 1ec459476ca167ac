"""Central finite-difference gradient checking.

Reliable only on float64 graphs; float32 noise swamps the comparison.
"""

from __future__ import annotations

import numpy as np

from .autograd import Tape, Tensor, backward
from .params import ParamStore


def numeric_gradient(loss_fn, tensor: Tensor, delta: float = 1e-5) -> np.ndarray:
    """d loss_fn() / d tensor entry by entry via central differences.
    loss_fn must re-run the forward pass against current values."""
    flat = tensor.values.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + delta
        up = float(loss_fn())
        flat[i] = keep - delta
        down = float(loss_fn())
        flat[i] = keep
        grad[i] = (up - down) / (2.0 * delta)
    return grad.reshape(tensor.values.shape)


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       atol: float = 1e-7) -> float:
    """Worst-case |a - n| / max(|a|, |n|), ignoring entries where both
    sides sit below atol."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.abs(a), np.abs(n))
    err = np.abs(a - n) / np.where(denom < atol, 1.0, denom)
    err = np.where(denom < atol, 0.0, err)
    return float(err.max()) if err.size else 0.0


def check_gradients(loss_fn, wrt, delta: float = 1e-5, atol: float = 1e-7) -> float:
    """Compare backward() grads against finite differences.

    loss_fn builds the forward pass from current parameter values and
    returns the scalar loss Tensor. `wrt` is a ParamStore or a list of
    Tensors. Returns the max relative error over all checked entries.
    """
    tensors = wrt.tensors() if isinstance(wrt, ParamStore) else list(wrt)
    for t in tensors:
        t.grad = None
    with Tape() as tape:
        tape.watch(tensors)
        loss = loss_fn()
    backward(tape, loss)
    analytic = [t.grad.copy() for t in tensors]
    for t in tensors:
        t.grad = None

    worst = 0.0
    for t, a in zip(tensors, analytic):
        n = numeric_gradient(lambda: loss_fn().values, t, delta=delta)
        worst = max(worst, max_relative_error(a, n, atol=atol))
    return worst
