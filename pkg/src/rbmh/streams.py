"""Named random streams.

Every chain owns one root :class:`numpy.random.SeedSequence`. Independent
sub-streams are derived from it by appending a fixed index to the spawn key,
so that turning weight computation on or off never shifts the draws used to
build the path, and replications can be scheduled in any order.
"""
from __future__ import annotations

import math
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]

_STREAM_INDEX = {
    "path": 0,        # acceptance uniforms of the chain
    "proposal": 1,    # proposals of the chain
    "weights": 2,     # fresh proposals/uniforms for the weight estimators
    "control": 3,     # control-variate draws y0
    "init": 4,        # initial state, when drawn from the target
}

# spawn-key code for k = infinity; finite k map to themselves
_INF_CODE = 2**31 - 1


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an int or SeedSequence, got {type(seed).__name__}")
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence(int(seed))


def replication_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Root seed of replication ``index`` of an experiment seeded with ``base_seed``."""
    return np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))


def k_code(k: float) -> int:
    if k == math.inf:
        return _INF_CODE
    return int(k)


class ChainStreams:
    """Factory of the independent generators belonging to one chain.

    Generators are created fresh on each call, so asking twice for the same
    stream replays the same draws.
    """

    def __init__(self, seed: SeedLike):
        self.root = as_seed_sequence(seed)

    def seed_sequence(self, name: str, *extra: int) -> np.random.SeedSequence:
        try:
            idx = _STREAM_INDEX[name]
        except KeyError:
            raise KeyError(f"unknown stream {name!r}; expected one of {sorted(_STREAM_INDEX)}") from None
        return np.random.SeedSequence(
            self.root.entropy,
            spawn_key=tuple(self.root.spawn_key) + (idx,) + tuple(int(e) for e in extra),
            pool_size=self.root.pool_size,
        )

    def generator(self, name: str, *extra: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence(name, *extra)))

    def weights(self, k: float) -> np.random.Generator:
        # one stream per k, so the weights for k=3 do not depend on which other k are requested
        return self.generator("weights", k_code(k))

    def describe(self) -> dict:
        return {"entropy": int(self.root.entropy), "spawn_key": [int(s) for s in self.root.spawn_key]}
