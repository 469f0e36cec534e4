"""Reproducible random streams.

Every stream is numpy's Philox-4x64 counter-based generator keyed by
(master_seed, stream_id); the k-th uniform of a stream is the k-th double
returned by ``Generator.random``. Streams never share state, so trajectories
with distinct stream ids can be run in any order or in parallel.
"""

from __future__ import annotations

import numpy as np

_BLOCK = 4096
_MASK64 = (1 << 64) - 1


def generator(master_seed: int, stream_id: int = 0) -> np.random.Generator:
    key = np.array([master_seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class Stream:
    """Buffered scalar uniforms from one (master_seed, stream_id) stream."""

    def __init__(self, master_seed: int, stream_id: int = 0):
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.gen = generator(self.master_seed, self.stream_id)
        self._buf = np.empty(0)
        self._pos = 0
        self.draws = 0

    def uniform(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self.gen.random(_BLOCK)
            self._pos = 0
        u = float(self._buf[self._pos])
        self._pos += 1
        self.draws += 1
        return u

    def __iter__(self):
        while True:
            yield self.uniform()
