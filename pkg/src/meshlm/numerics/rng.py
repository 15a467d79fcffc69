"""Seeded, splittable random numbers.

Counter-based Philox generator keyed by (seed, stream). The same
(seed, stream, call sequence) always yields the same values. Independent
streams are derived by hashing a name, so parameter init order can change
without perturbing any draws.
"""

import hashlib

import numpy as np

ALGORITHM = "philox4x64"


def _stream_of(parent_stream, name):
    h = hashlib.sha256(f"{parent_stream}|{name}".encode()).digest()
    return int.from_bytes(h[:8], "little")


class Rng:
    def __init__(self, seed, stream=0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream) & 0xFFFFFFFFFFFFFFFF
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def split(self, name):
        """Fresh independent Rng for `name`; does not advance this one."""
        return Rng(self.seed, _stream_of(self.stream, name))

    def normal(self, shape, std=1.0, dtype=np.float64):
        out = self._gen.standard_normal(size=shape, dtype=np.float64) * std
        return out.astype(dtype, copy=False)

    def uniform(self, shape, low=0.0, high=1.0, dtype=np.float64):
        out = self._gen.uniform(low, high, size=shape)
        return out.astype(dtype, copy=False)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size=size, dtype=np.int64)

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.stream})"
