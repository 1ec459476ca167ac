"""
The reverse-mode core in five minutes
=====================================

Build a small expression, record it on a tape, pull gradients back
through it, and confirm them against central finite differences.
"""

import numpy as np

from aem.autograd import Tape, Tensor, backward, detach, matmul, mul, sigmoid, sum_all
from aem.gradcheck import numeric_gradient

# Two leaf tensors. Nothing is recorded until a tape is active, so
# these are plain arrays with a .grad slot.
rng = np.random.default_rng(0)
W = Tensor(rng.normal(size=(3, 4)), name="W")
x = Tensor(rng.normal(size=(2, 3)), name="x")

# loss = sum(sigmoid(x @ W) * sigmoid(x @ W)); the tape records every
# op, then backward replays them in reverse.
with Tape() as tape:
    tape.watch([W, x])
    y = sigmoid(matmul(x, W))
    loss = sum_all(mul(y, y))
    backward(tape, loss)

print("loss         :", float(loss.values))
print("dloss/dW[0,0]:", W.grad[0, 0])

# The same derivative by central differences: nudge the entry both
# ways and take the slope. Agreement to ~1e-10 is typical in float64.
def run():
    return sum_all(mul(sigmoid(matmul(x, W)), sigmoid(matmul(x, W)))).values

numeric = numeric_gradient(run, W)
print("numeric      :", numeric[0, 0])
print("max |diff|   :", np.abs(W.grad - numeric).max())

# detach() copies a value out of the graph. In sum(y * detach(y)) the
# second factor is a constant, so the gradient is exactly half of the
# sum(y * y) gradient above: d(y*y) = 2y dy, d(y*const) = const dy.
grad_full = W.grad.copy()
W.grad = None
x.grad = None
with Tape() as tape:
    tape.watch([W, x])
    y = sigmoid(matmul(x, W))
    loss = sum_all(mul(y, detach(y)))
    backward(tape, loss)
print("detached grad is exactly half:", bool(np.all(W.grad * 2.0 == grad_full)))

# Without an active tape the same calls are plain inference: no
# recording, no .grad updates, no memory held.
y = sigmoid(matmul(x, W))
print("inference output shape:", y.values.shape)
