"""Neural building blocks: embeddings, LSTM cell and sequence runners,
the representation-mapping MLP, output projection, and Luong-style
attention.

All parameters are registered in a ParamStore under the prefix given at
construction, so layer code never owns arrays directly and checkpoints
are a flat name -> array map.
"""

from __future__ import annotations

import numpy as np

from .autograd import (
    Tensor,
    add,
    add_bias,
    attend,
    batched_dot,
    concat_cols,
    embedding_lookup,
    lerp_mask,
    masked_softmax,
    matmul,
    mul,
    reshape,
    sigmoid,
    slice_cols,
    stack_steps,
    tanh,
)
from .params import ParamStore


class Embedding:
    def __init__(self, store: ParamStore, prefix: str, vocab_size: int, embed_size: int,
                 dtype=np.float32):
        self.table = store.add(f"{prefix}.W", (vocab_size, embed_size), dtype=dtype)

    def lookup(self, ids: np.ndarray) -> Tensor:
        return embedding_lookup(self.table, ids)


class LSTMCell:
    """Single LSTM step over a batch.

    The 4H gate axis is ordered [input, forget, cell candidate, output];
    this order is part of the checkpoint format and must not change.
    """

    def __init__(self, store: ParamStore, prefix: str, input_size: int, hidden_size: int,
                 dtype=np.float32):
        self.hidden_size = hidden_size
        self.W = store.add(f"{prefix}.W", (input_size, 4 * hidden_size), dtype=dtype)
        self.U = store.add(f"{prefix}.U", (hidden_size, 4 * hidden_size), dtype=dtype)
        self.b = store.add(f"{prefix}.b", (4 * hidden_size,), dtype=dtype)

    def step(self, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> tuple[Tensor, Tensor]:
        H = self.hidden_size
        pre = add_bias(add(matmul(x, self.W), matmul(h_prev, self.U)), self.b)
        i = sigmoid(slice_cols(pre, 0, H))
        f = sigmoid(slice_cols(pre, H, 2 * H))
        g = tanh(slice_cols(pre, 2 * H, 3 * H))
        o = sigmoid(slice_cols(pre, 3 * H, 4 * H))
        c = add(mul(f, c_prev), mul(i, g))
        h = mul(o, tanh(c))
        return h, c


class OutputProjection:
    def __init__(self, store: ParamStore, prefix: str, hidden_size: int, vocab_size: int,
                 dtype=np.float32):
        self.W = store.add(f"{prefix}.W", (hidden_size, vocab_size), dtype=dtype)
        self.b = store.add(f"{prefix}.b", (vocab_size,), dtype=dtype)

    def logits(self, h: Tensor) -> Tensor:
        return add_bias(matmul(h, self.W), self.b)


class MappingMLP:
    """Transforms one utterance representation into another: a tanh
    hidden layer then a linear output, both the full state width."""

    def __init__(self, store: ParamStore, prefix: str, state_size: int, dtype=np.float32):
        self.W1 = store.add(f"{prefix}.W1", (state_size, state_size), dtype=dtype)
        self.b1 = store.add(f"{prefix}.b1", (state_size,), dtype=dtype)
        self.W2 = store.add(f"{prefix}.W2", (state_size, state_size), dtype=dtype)
        self.b2 = store.add(f"{prefix}.b2", (state_size,), dtype=dtype)

    def forward(self, h: Tensor) -> Tensor:
        if h.values.ndim != 2 or h.values.shape[1] != self.W1.values.shape[0]:
            raise ValueError(
                f"mapping input must be (B, {self.W1.values.shape[0]}), got {h.values.shape}")
        hidden = tanh(add_bias(matmul(h, self.W1), self.b1))
        return add_bias(matmul(hidden, self.W2), self.b2)


class LuongAttention:
    """General-score attention over encoder annotations."""

    def __init__(self, store: ParamStore, prefix: str, hidden_size: int, dtype=np.float32):
        self.W_a = store.add(f"{prefix}.W_a", (hidden_size, hidden_size), dtype=dtype)
        self.W_c = store.add(f"{prefix}.W_c", (2 * hidden_size, hidden_size), dtype=dtype)

    def context(self, decoder_h: Tensor, encoder_states: Tensor,
                mask: np.ndarray) -> tuple[Tensor, Tensor]:
        """Scores are decoder_h . W_a . enc_t over all positions; returns
        (context, weights) with weights a masked softmax over positions."""
        proj = matmul(decoder_h, self.W_a)
        weights = masked_softmax(batched_dot(proj, encoder_states), mask)
        return attend(weights, encoder_states), weights

    def attentional_hidden(self, context: Tensor, decoder_h: Tensor) -> Tensor:
        return tanh(matmul(concat_cols(context, decoder_h), self.W_c))


def zero_state(batch_size: int, hidden_size: int, dtype) -> Tensor:
    return Tensor(np.zeros((batch_size, hidden_size), dtype=dtype))


def encode_sequence(cell: LSTMCell, embedding: Embedding, tokens: np.ndarray,
                    mask: np.ndarray) -> tuple[Tensor, Tensor]:
    """Run the cell left to right from a zero state.

    Padded positions carry the previous state through unchanged, so the
    state after the last step is the state at each sequence's final
    unmasked position. Returns (per-step hiddens (B, T, H), final
    [h; c] of width 2H).
    """
    B, T = tokens.shape
    dtype = cell.W.values.dtype
    h = zero_state(B, cell.hidden_size, dtype)
    c = zero_state(B, cell.hidden_size, dtype)
    steps = []
    for t in range(T):
        x = embedding.lookup(tokens[:, t])
        h_new, c_new = cell.step(x, h, c)
        keep = mask[:, t : t + 1]
        h = lerp_mask(h_new, h, keep)
        c = lerp_mask(c_new, c, keep)
        steps.append(h)
    return stack_steps(steps), concat_cols(h, c)


def split_state(state: Tensor, hidden_size: int) -> tuple[Tensor, Tensor]:
    """Undo the [h; c] concatenation."""
    if state.values.shape[1] != 2 * hidden_size:
        raise ValueError(f"state width {state.values.shape[1]} != 2*{hidden_size}")
    return slice_cols(state, 0, hidden_size), slice_cols(state, hidden_size, 2 * hidden_size)


def shifted_inputs(targets: np.ndarray, bos_id: int) -> np.ndarray:
    """Teacher-forcing inputs: BOS then the gold tokens, dropping the last."""
    inputs = np.empty_like(targets)
    inputs[:, 0] = bos_id
    inputs[:, 1:] = targets[:, :-1]
    return inputs


def decode_teacher_forced(cell: LSTMCell, embedding: Embedding, proj: OutputProjection,
                          init: Tensor, targets: np.ndarray, bos_id: int,
                          attention: LuongAttention | None = None,
                          encoder_states: Tensor | None = None,
                          encoder_mask: np.ndarray | None = None) -> Tensor:
    """Logits (B, T, V) for predicting each gold token from the ones
    before it, starting the recurrence from `init` ([h; c], width 2H).

    With attention, each step's projection input is the attentional
    hidden state built from the decoder state and encoder annotations.
    """
    B, T = targets.shape
    h, c = split_state(init, cell.hidden_size)
    inputs = shifted_inputs(targets, bos_id)
    feeds = []
    for t in range(T):
        x = embedding.lookup(inputs[:, t])
        h, c = cell.step(x, h, c)
        if attention is not None:
            context, _ = attention.context(h, encoder_states, encoder_mask)
            feeds.append(attention.attentional_hidden(context, h))
        else:
            feeds.append(h)
    flat = reshape(stack_steps(feeds), (B * T, cell.hidden_size))
    logits = proj.logits(flat)
    return reshape(logits, (B, T, proj.W.values.shape[1]))


def greedy_decode(cell: LSTMCell, embedding: Embedding, proj: OutputProjection,
                  init: Tensor, bos_id: int, eos_id: int, pad_id: int, max_len: int,
                  attention: LuongAttention | None = None,
                  encoder_states: Tensor | None = None,
                  encoder_mask: np.ndarray | None = None) -> list[list[int]]:
    """Argmax decoding from `init`, at most max_len tokens per sequence,
    stopping at EOS. PAD and BOS are never emitted; argmax ties break
    toward the lowest token id."""
    B = init.values.shape[0]
    h, c = split_state(init, cell.hidden_size)
    current = np.full(B, bos_id, dtype=np.int64)
    finished = np.zeros(B, dtype=bool)
    columns = []
    for _ in range(max_len):
        x = embedding.lookup(current)
        h, c = cell.step(x, h, c)
        if attention is not None:
            context, _ = attention.context(h, encoder_states, encoder_mask)
            feed = attention.attentional_hidden(context, h)
        else:
            feed = h
        logits = proj.logits(feed).values.copy()
        logits[:, pad_id] = -np.inf
        logits[:, bos_id] = -np.inf
        chosen = logits.argmax(axis=1)
        chosen = np.where(finished, pad_id, chosen)
        columns.append(chosen)
        finished |= chosen == eos_id
        current = chosen
        if finished.all():
            break
    out: list[list[int]] = []
    matrix = np.stack(columns, axis=1) if columns else np.zeros((B, 0), dtype=np.int64)
    for row in matrix:
        ids = []
        for tok in row:
            if tok == eos_id or tok == pad_id:
                break
            ids.append(int(tok))
        out.append(ids)
    return out
