"""Deterministic counter-based random number generation.

Everything random in this package (parameter init, epoch shuffling) is
derived from SplitMix64 so that a fixed seed reproduces bit-identical
streams in any language. The contract, for re-implementers:

    GOLDEN = 0x9E3779B97F4A7C15
    mix64(z):  z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
               z ^= z >> 27; z *= 0x94D049BB133111EB
               z ^= z >> 31          (all on 64-bit unsigned, wrapping)
    output k of stream with seed s = mix64(s + (k + 1) * GOLDEN)

Uniform doubles in [0, 1) take the top 53 bits: (u >> 11) * 2**-53.
Named sub-streams hash the name with FNV-1a (64-bit) and xor it into
the seed, so each parameter gets a stream independent of every other
parameter and of insertion order.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # vectorized finalizer; uint64 arithmetic wraps, which is what we want
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def fnv1a64(name: str) -> int:
    h = _FNV_OFFSET
    for byte in name.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


def derive_seed(seed: int, *streams: int | str) -> int:
    """Fold stream labels (ints or names) into a seed, one mix per label."""
    s = seed & MASK64
    for label in streams:
        key = fnv1a64(label) if isinstance(label, str) else (label & MASK64)
        s = mix64(s ^ key)
    return s


class SplitMix64:
    """Sequential view of the counter stream: output k = mix64(seed + (k+1)*GOLDEN)."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64((self.seed + self.counter * GOLDEN) & MASK64)

    def next_below(self, n: int) -> int:
        """Integer in [0, n). Uses modulo; bias is negligible for n << 2**64."""
        if n <= 0:
            raise ValueError(f"next_below needs n >= 1, got {n}")
        return self.next_u64() % n

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0**-53
        return lo + u * (hi - lo)

    def fill_uniform(self, n: int, lo: float, hi: float) -> np.ndarray:
        """n uniform doubles in [lo, hi), consuming n counter steps."""
        ks = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + ks * np.uint64(GOLDEN)
        u = (_mix64_array(z) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        self.counter += n
        return lo + u * (hi - lo)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, high index down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        idx = list(range(n))
        self.shuffle(idx)
        return idx
