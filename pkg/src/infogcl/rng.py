"""SplitMix64 generator shared by every stochastic step in the package.

The output sequence is normative: fixtures written against it must reproduce
bit-for-bit in any other implementation, so nothing here may call into
``numpy.random`` or :mod:`random`.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

# xor-ed into a seed to open a second, decorrelated stream
STREAM_CONSTANT = 0xD1B54A32D192ED03


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Fold integer keys into a seed, one SplitMix64 round per key."""
    s = seed & MASK64
    for k in keys:
        s = mix64((s ^ (k & MASK64)) + GOLDEN_GAMMA)
    return s


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-style SplitMix64 stream.

    Every draw advances the state by the golden-gamma increment and returns
    the finalized state. Uniform integers use rejection sampling so that the
    result is exactly uniform on ``[0, n)``.
    """

    def __init__(self, seed: int = 0):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def next_block(self, count: int) -> np.ndarray:
        """The next ``count`` raw outputs as a uint64 array."""
        if count <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GOLDEN_GAMMA)
            out = _mix_array(z)
        self.state = (self.state + count * GOLDEN_GAMMA) & MASK64
        return out

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def random_array(self, count: int) -> np.ndarray:
        raw = self.next_block(count)
        return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float, shape: tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        return (low + (high - low) * self.random_array(count)).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``range(n)``, swapping from the back."""
        out = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def sample(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)``, uniform without replacement.

        Partial Fisher-Yates from the front: position ``i`` swaps with a
        uniform index in ``[i, n)``.
        """
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        pool = np.arange(n)
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k].copy()

    def choice_weighted(self, probs: np.ndarray) -> int:
        """Inverse-CDF draw from a finite distribution."""
        cdf = np.cumsum(probs)
        u = self.random() * cdf[-1]
        return int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))
