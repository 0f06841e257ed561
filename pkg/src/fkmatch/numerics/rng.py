"""Counter-based random streams keyed by ``(master_seed, stream_index)``.

Every stream is a Philox-4x64 generator whose 128-bit key is the pair
itself, so stream ``k`` can be rebuilt anywhere (any worker, any chunking)
without touching the others.  Monte Carlo paths use their path index as
``stream_index`` (offset by a per-job base).
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


class RngStream:
    """Single-owner random stream; do not share one instance across threads."""

    __slots__ = ("master_seed", "stream_index", "_gen")

    def __init__(self, master_seed: int, stream_index: int):
        if stream_index < 0:
            raise ValueError("stream_index must be non-negative")
        self.master_seed = int(master_seed) & _MASK64
        self.stream_index = int(stream_index) & _MASK64
        key = np.array([self.master_seed, self.stream_index], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_index={self.stream_index})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def uniform(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def poisson(self, lam, size=None):
        return self._gen.poisson(lam, size)

    def gamma(self, shape, scale=1.0, size=None):
        return self._gen.gamma(shape, scale, size)


def stream_block(master_seed: int, base: int, count: int) -> list[RngStream]:
    return [RngStream(master_seed, base + i) for i in range(count)]


def normal_block(master_seed: int, base: int, count: int, n: int) -> np.ndarray:
    """``(count, n)`` standard normals; row ``i`` comes only from stream ``base + i``."""
    out = np.empty((count, n))
    for i in range(count):
        out[i] = RngStream(master_seed, base + i).normal(n)
    return out
