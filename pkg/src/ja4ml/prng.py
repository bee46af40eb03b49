"""SplitMix64, the single source of randomness for splits and subsampling.

SplitMix64 (Steele, Lea & Flood, 2014) is tiny, has published constants and is
trivial to port, so a manifest written here can be replayed in any language::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

All arithmetic is modulo 2**64.
"""

from __future__ import annotations

import numpy as np

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
MASK64 = (1 << 64) - 1


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def next_below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` by rejection (no modulo bias)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        threshold = (1 << 64) % bound
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % bound

    def next_float(self) -> float:
        """Uniform double in ``[0, 1)`` from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def floats(self, n: int) -> np.ndarray:
        """The next ``n`` values of :meth:`next_float`, vectorised.

        Equivalent to calling ``next_float`` ``n`` times; the state advances by ``n``.
        """
        with np.errstate(over="ignore"):
            steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(GOLDEN_GAMMA)
            z = np.uint64(self.state) + steps
            z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GOLDEN_GAMMA) & MASK64
        return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def derive_seed(seed: int, *stream: int) -> int:
    """Independent child seed for a named stream (e.g. boosting round ``r``)."""
    s = seed & MASK64
    for part in stream:
        s = mix64((s ^ mix64((part + GOLDEN_GAMMA) & MASK64)) & MASK64)
    return s


def permutation(n: int, seed: int) -> list[int]:
    """Fisher-Yates shuffle of ``range(n)`` driven by SplitMix64(seed)."""
    rng = SplitMix64(seed)
    items = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.next_below(i + 1)
        items[i], items[j] = items[j], items[i]
    return items
