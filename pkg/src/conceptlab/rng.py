"""Deterministic random streams.

Every stream is identified by a (seed, stream) pair of 64-bit integers and
is backed by counter-based Philox, so draws are reproducible across runs and
platforms and sub-streams can be spawned without coordination.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    """One round of splitmix64; decorrelates derived stream ids."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class SeededRng:
    """A reproducible Gaussian/integer source tied to (seed, stream)."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "SeededRng":
        """Independent sub-stream; deterministic in (seed, stream, index)."""
        return SeededRng(self.seed, _splitmix64(self.stream ^ ((index + 1) * _GOLDEN & _MASK64)))

    def normal(self, shape) -> np.ndarray:
        """I.i.d. standard-normal draws with the given shape."""
        shape = _check_shape(shape)
        return self._gen.standard_normal(shape, dtype=np.float64)

    def uniform(self, shape) -> np.ndarray:
        shape = _check_shape(shape)
        return self._gen.random(shape, dtype=np.float64)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        """Uniform integers in [low, high)."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        return self._gen.integers(low, high, size=size)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


def _check_shape(shape):
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape),)
    shape = tuple(int(d) for d in shape)
    if len(shape) == 0 or any(d < 1 for d in shape):
        raise ValueError(f"shape must be nonempty with all dims >= 1, got {shape}")
    return shape


def gaussian_sample(rng: SeededRng, shape) -> np.ndarray:
    """Standard-normal array; deterministic for a fixed (seed, stream)."""
    return rng.normal(shape)
