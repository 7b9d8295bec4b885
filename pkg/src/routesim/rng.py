"""Single-stream buffered RNG for reproducible runs.

One PCG64 stream per simulation, consumed in fixed program order. Uniform
doubles are drawn in blocks so the per-step generation sweep is a vectorized
slice and scalar draws stay cheap inside the node loop.
"""

from __future__ import annotations

import numpy as np


class RunRNG:
    """Buffered uniform stream over numpy's PCG64.

    Draw-consumption contract (relied on by the routing oracle tests):
    `uniforms(k)` consumes exactly k values, `uniform()` exactly one,
    `randint(k)` exactly one. Nothing is ever discarded, so two instances
    seeded identically yield identical decision sequences for identical
    call patterns.
    """

    __slots__ = ("_gen", "_buf", "_pos", "_block")

    def __init__(self, seed: int, block: int = 1 << 16):
        self._gen = np.random.default_rng(seed)
        self._block = block
        self._buf = self._gen.random(block)
        self._pos = 0

    def _refill(self, need: int) -> None:
        tail = self._buf[self._pos:]
        size = max(self._block, need - len(tail))
        self._buf = np.concatenate([tail, self._gen.random(size)])
        self._pos = 0

    def uniforms(self, k: int) -> np.ndarray:
        """Next k uniform doubles in [0, 1) as a read-only view."""
        if self._pos + k > len(self._buf):
            self._refill(k)
        out = self._buf[self._pos:self._pos + k]
        self._pos += k
        return out

    def uniform(self) -> float:
        if self._pos >= len(self._buf):
            self._refill(1)
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)

    def randint(self, k: int) -> int:
        """Uniform integer in [0, k); consumes exactly one uniform."""
        j = int(self.uniform() * k)
        return k - 1 if j >= k else j
