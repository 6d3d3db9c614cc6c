"""
Seedable, splittable random streams

Every replicate draws from a stream that is a pure function of
(master seed, key path), so results never depend on the parallel schedule.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

# Stream roles, appended as the last key of a replicate stream
MATRIX = 0
ENVIRONMENT = 1
GAUSSIAN = 2
MATRIX_ALT = 3

# Top-level branches of the master stream
REPLICATES = 0
FIXED = 1
DECOMPOSITION = 2


@dataclass(frozen=True)
class RngState:
    """Handle on one stream of the master seed's tree of streams"""

    seed: int
    key: Tuple[int, ...] = ()

    def split(self, *keys: int) -> "RngState":
        """Child stream addressed by the given keys"""
        return RngState(self.seed, self.key + tuple(int(k) for k in keys))

    def replicate(self, index: int, role: int) -> "RngState":
        return self.split(REPLICATES, index, role)

    def fixed(self, role: int) -> "RngState":
        return self.split(FIXED, role)

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(sequence))


def as_generator(rng) -> np.random.Generator:
    """Accept an RngState, a Generator or an int seed"""
    if isinstance(rng, RngState):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RngState(int(rng)).generator()
