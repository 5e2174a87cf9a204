"""Counter-based, splittable random streams.

Every random draw in the package goes through :class:`RngSeed`. A seed is a
64-bit integer plus a stream index; further integer keys (replicate number,
restart number, ...) derive independent child streams. The generator is
Philox, which is counter based, so a child stream depends only on its keys and
never on how many draws other streams have consumed. That makes parallel
sweeps reproducible regardless of scheduling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

_U64 = 2**64


@dataclass(frozen=True)
class RngSeed:
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < _U64):
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.stream) < 0:
            raise InvalidInputError(f"stream index must be >= 0, got {self.stream}")

    def child(self, *keys: int) -> "RngSeed":
        """Seed for a sub-stream; ``child(a).child(b)`` differs from ``child(a, b)``
        only in bookkeeping, both are deterministic."""
        stream = self.stream
        for key in keys:
            stream = _mix(stream, int(key))
        return RngSeed(self.seed, stream)

    def generator(self, *keys: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), *map(int, keys)))
        return np.random.Generator(np.random.Philox(ss))


def _mix(a: int, b: int) -> int:
    # splitmix64-style combination, kept in 63 bits so it stays a valid stream index
    x = (a * 0x9E3779B97F4A7C15 + b + 0x632BE59BD9B4E019) % _U64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) % _U64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) % _U64
    x ^= x >> 31
    return x >> 1


def as_seed(seed) -> RngSeed:
    """Coerce ``None``, an int, a ``(seed, stream)`` pair or an RngSeed."""
    if isinstance(seed, RngSeed):
        return seed
    if seed is None:
        return RngSeed()
    if isinstance(seed, (tuple, list)):
        return RngSeed(*seed)
    return RngSeed(int(seed))
