"""
Counter-based random streams.

A StreamKey is a master seed plus a lineage of nonnegative integers
(experiment, replicate, series index, draw counter, ...). The lineage is hashed
together with the seed by numpy's SeedSequence and drives a Philox generator, so
every stream is a pure function of its key, whatever order streams are opened in
and whichever process opens them.
"""
from dataclasses import dataclass

import numpy as np

from core.exceptions import InvalidParameterException

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class StreamKey:
    seed: int
    lineage: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed <= _SEED_MASK:
            raise InvalidParameterException("seed", self.seed, "0 <= seed < 2**64")
        lineage = tuple(int(i) for i in self.lineage)
        if any(i < 0 for i in lineage):
            raise InvalidParameterException("lineage", lineage, "nonnegative integers")
        object.__setattr__(self, "lineage", lineage)

    def child(self, *indices: int) -> "StreamKey":
        return StreamKey(self.seed, self.lineage + tuple(indices))

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.lineage)
        return np.random.Generator(np.random.Philox(sequence))


# Lineage tags separating the sub-streams of one replicate
INNOVATION_STREAM = 0
COEFFICIENT_STREAM = 1
