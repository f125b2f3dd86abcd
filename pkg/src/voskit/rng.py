"""Deterministic counter-based random number generator.

Synthetic corpora and training runs must be reproducible bit for bit from a
single integer seed, independent of platform, process or chunking of the
draw calls. The generator here is SplitMix64 driven by a counter: draw i of
stream `seed` is ``mix64(seed + (i + 1) * GOLDEN)``. Because each output
depends only on (seed, i), draws can be produced one at a time or as numpy
batches with identical results.

Constants are the standard SplitMix64 ones (Steele, Lea & Flood).
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 stream addressed by (seed, draw counter)."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._counter = 0

    def uint64(self, n: int) -> np.ndarray:
        """Next n raw 64-bit draws as a uint64 array."""
        if n < 0:
            raise ValueError("draw count must be >= 0")
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix64(self._seed + idx * _GOLDEN)

    def uniform(self, n: int) -> np.ndarray:
        """n doubles uniform in [0, 1), using the top 53 bits of each draw."""
        return (self.uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform1(self) -> float:
        return float(self.uniform(1)[0])

    def integers(self, low: int, high: int, n: int = 1) -> np.ndarray:
        """n integers uniform in [low, high] inclusive (floor of a uniform;
        bias is negligible for the small ranges used here)."""
        if high < low:
            raise ValueError("empty integer range")
        span = high - low + 1
        return low + np.floor(self.uniform(n) * span).astype(np.int64)

    def integer1(self, low: int, high: int) -> int:
        return int(self.integers(low, high, 1)[0])

    def uniform_range(self, low: float, high: float, n: int = 1) -> np.ndarray:
        return low + (high - low) * self.uniform(n)

    def shuffle(self, items: np.ndarray) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.integer1(0, i)
            items[i], items[j] = items[j], items[i]

    def spawn(self, key: int) -> "Rng":
        """Independent child stream; deterministic in (seed, key)."""
        with np.errstate(over="ignore"):
            child = _mix64(np.asarray(self._seed + np.uint64(key) * _MIX2))
        return Rng(int(child))
