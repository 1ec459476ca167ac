"""Minimal reverse-mode differentiation on numpy arrays.

Ops record onto the innermost active Tape (a `with Tape() as tape:`
block); outside any tape they just compute values, which is the
inference path. Backward replays the tape in reverse recording order
and accumulates into `.grad`, never overwriting, so a tensor used
twice collects both contributions.

Training runs in float32; gradient-check tests build float64 graphs.
Ops never broadcast except where stated (add_bias, lerp_mask).
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """Dense real array plus an optional gradient of the same shape."""

    __slots__ = ("values", "grad", "name")

    def __init__(self, values, name: str | None = None):
        self.values = np.asarray(values)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def item(self) -> float:
        return float(self.values)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.values.shape}, dtype={self.values.dtype})"


_TAPES: list["Tape"] = []


class Tape:
    """Ordered record of ops for one backward pass."""

    def __init__(self):
        self._records: list[tuple[Tensor, callable]] = []
        self._produced: set[int] = set()
        self._watched: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPES.pop()
        assert popped is self

    def record(self, out: Tensor, backward_fn) -> None:
        self._records.append((out, backward_fn))
        self._produced.add(id(out))

    def watch(self, tensors) -> None:
        """Leaves that must end up with a grad even if the loss never reaches them."""
        self._watched.extend(tensors)

    def __len__(self) -> int:
        return len(self._records)


def active_tape() -> Tape | None:
    return _TAPES[-1] if _TAPES else None


def _record(out: Tensor, backward_fn) -> None:
    tape = active_tape()
    if tape is not None:
        tape.record(out, backward_fn)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def backward(tape: Tape, loss: Tensor) -> None:
    """Populate grads of everything reachable from `loss`; watched leaves
    that stay unreachable get zero grads."""
    if loss.values.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.values.shape}")
    if id(loss) not in tape._produced:
        raise ValueError("loss was not produced on this tape")
    _accum(loss, np.ones_like(loss.values))
    for out, backward_fn in reversed(tape._records):
        if out.grad is not None:
            backward_fn(out.grad)
    for t in tape._watched:
        if t.grad is None:
            t.grad = np.zeros_like(t.values)


def detach(x: Tensor) -> Tensor:
    """Same values, no backward link."""
    return Tensor(x.values)


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.values.shape[1] != b.values.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.values.shape} x {b.values.shape}")
    out = Tensor(a.values @ b.values)

    def back(gout):
        _accum(a, gout @ b.values.T)
        _accum(b, a.values.T @ gout)

    _record(out, back)
    return out


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.values.shape != b.values.shape:
        raise ValueError(f"{op} shape mismatch: {a.values.shape} vs {b.values.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("add", a, b)
    out = Tensor(a.values + b.values)

    def back(gout):
        _accum(a, gout)
        _accum(b, gout)

    _record(out, back)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("sub", a, b)
    out = Tensor(a.values - b.values)

    def back(gout):
        _accum(a, gout)
        _accum(b, -gout)

    _record(out, back)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("mul", a, b)
    out = Tensor(a.values * b.values)

    def back(gout):
        _accum(a, gout * b.values)
        _accum(b, gout * a.values)

    _record(out, back)
    return out


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Row-wise bias: (N, D) + (D,). The one sanctioned broadcast."""
    if x.values.ndim != 2 or b.values.shape != (x.values.shape[1],):
        raise ValueError(f"add_bias shape mismatch: {x.values.shape} + {b.values.shape}")
    out = Tensor(x.values + b.values)

    def back(gout):
        _accum(x, gout)
        _accum(b, gout.sum(axis=0))

    _record(out, back)
    return out


def scale(x: Tensor, k: float) -> Tensor:
    out = Tensor(x.values * k)

    def back(gout):
        _accum(x, gout * k)

    _record(out, back)
    return out


def sigmoid(x: Tensor) -> Tensor:
    # tanh form is stable for large |x| in both directions
    out = Tensor(0.5 * (np.tanh(x.values * 0.5) + 1.0))

    def back(gout):
        s = out.values
        _accum(x, gout * s * (1.0 - s))

    _record(out, back)
    return out


def tanh(x: Tensor) -> Tensor:
    out = Tensor(np.tanh(x.values))

    def back(gout):
        _accum(x, gout * (1.0 - out.values * out.values))

    _record(out, back)
    return out


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """(N, Da) ++ (N, Db) -> (N, Da+Db)."""
    if a.values.ndim != 2 or b.values.ndim != 2 or a.values.shape[0] != b.values.shape[0]:
        raise ValueError(f"concat_cols shape mismatch: {a.values.shape} vs {b.values.shape}")
    na = a.values.shape[1]
    out = Tensor(np.concatenate([a.values, b.values], axis=1))

    def back(gout):
        _accum(a, gout[:, :na])
        _accum(b, gout[:, na:])

    _record(out, back)
    return out


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    if x.values.ndim != 2 or not (0 <= start < stop <= x.values.shape[1]):
        raise ValueError(f"slice_cols [{start}:{stop}] invalid for shape {x.values.shape}")
    out = Tensor(x.values[:, start:stop].copy())

    def back(gout):
        if x.grad is None:
            x.grad = np.zeros_like(x.values)
        x.grad[:, start:stop] += gout

    _record(out, back)
    return out


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(x.values.reshape(shape))

    def back(gout):
        _accum(x, gout.reshape(x.values.shape))

    _record(out, back)
    return out


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of (V, E) by integer ids; grads accumulate only into
    the looked-up rows."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.values.shape[0]):
        raise ValueError(f"embedding id out of range for table with {table.values.shape[0]} rows")
    out = Tensor(table.values[ids])

    def back(gout):
        if table.grad is None:
            table.grad = np.zeros_like(table.values)
        np.add.at(table.grad, ids, gout)

    _record(out, back)
    return out


def stack_steps(steps: list[Tensor]) -> Tensor:
    """T tensors of (B, H) -> (B, T, H)."""
    out = Tensor(np.stack([s.values for s in steps], axis=1))

    def back(gout):
        for t, s in enumerate(steps):
            _accum(s, gout[:, t, :])

    _record(out, back)
    return out


def lerp_mask(new: Tensor, prev: Tensor, keep: np.ndarray) -> Tensor:
    """keep*new + (1-keep)*prev with a constant (B, 1) column; carries the
    previous state through padded timesteps."""
    _check_same_shape("lerp_mask", new, prev)
    keep = np.asarray(keep, dtype=new.values.dtype)
    out = Tensor(keep * new.values + (1.0 - keep) * prev.values)

    def back(gout):
        _accum(new, gout * keep)
        _accum(prev, gout * (1.0 - keep))

    _record(out, back)
    return out


def batched_dot(q: Tensor, states: Tensor) -> Tensor:
    """(B, H) against (B, T, H) -> per-position scores (B, T)."""
    out = Tensor(np.einsum("bh,bth->bt", q.values, states.values))

    def back(gout):
        _accum(q, np.einsum("bt,bth->bh", gout, states.values))
        _accum(states, np.einsum("bt,bh->bth", gout, q.values))

    _record(out, back)
    return out


def attend(weights: Tensor, states: Tensor) -> Tensor:
    """Convex combination of (B, T, H) states by (B, T) weights -> (B, H)."""
    out = Tensor(np.einsum("bt,bth->bh", weights.values, states.values))

    def back(gout):
        _accum(weights, np.einsum("bh,bth->bt", gout, states.values))
        _accum(states, np.einsum("bt,bh->bth", weights.values, gout))

    _record(out, back)
    return out


def masked_softmax(scores: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over axis 1 restricted to mask==1 positions; masked
    positions get weight exactly 0. Rejects fully masked rows."""
    mask = np.asarray(mask, dtype=scores.values.dtype)
    if mask.shape != scores.values.shape:
        raise ValueError(f"mask shape {mask.shape} != scores shape {scores.values.shape}")
    if np.any(mask.sum(axis=1) == 0):
        raise ValueError("masked_softmax: a row has no unmasked positions")
    neg = np.where(mask > 0, scores.values, -np.inf)
    m = neg.max(axis=1, keepdims=True)
    e = np.exp(neg - m)
    e = np.where(mask > 0, e, 0.0).astype(scores.values.dtype)
    out = Tensor(e / e.sum(axis=1, keepdims=True))

    def back(gout):
        w = out.values
        inner = (gout * w).sum(axis=1, keepdims=True)
        _accum(scores, (gout - inner) * w)

    _record(out, back)
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.asarray(x.values.sum(), dtype=x.values.dtype))

    def back(gout):
        _accum(x, np.broadcast_to(gout, x.values.shape).copy())

    _record(out, back)
    return out


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> tuple[Tensor, int]:
    """Sum over mask==1 rows of -log softmax(logits)[target].

    Returns (loss_sum, n_tokens); callers divide by n_tokens for the
    per-token mean. Backward is (softmax - onehot) on unmasked rows and
    exactly zero on masked rows.
    """
    targets = np.asarray(targets)
    mask = np.asarray(mask)
    n, v = logits.values.shape
    if targets.shape != (n,) or mask.shape != (n,):
        raise ValueError(f"targets/mask must be length {n}, got {targets.shape} / {mask.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= v):
        raise ValueError(f"target index out of range for {v} classes")
    shifted = logits.values - logits.values.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    fmask = mask.astype(logits.values.dtype)
    rows = np.arange(n)
    loss = -(logp[rows, targets] * fmask).sum()
    out = Tensor(np.asarray(loss, dtype=logits.values.dtype))

    def back(gout):
        probs = np.exp(logp)
        probs[rows, targets] -= 1.0
        probs *= fmask[:, None]
        _accum(logits, probs * gout)

    _record(out, back)
    return out, int(mask.sum())
