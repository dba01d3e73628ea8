from __future__ import annotations

from enum import IntEnum

import numpy as np

__all__ = ["Stream", "TrialSeed", "Random"]

_SEED_MASK = (1 << 64) - 1


class Stream(IntEnum):
    graph = 0
    opinions = 1


class Random(np.random.Generator):
    """
    A numpy Generator that remembers the seed it was built from.

    Every trial of every experiment gets its own Random per stream so that
    a result can be rebuilt bit for bit from (config, seed) alone.
    """

    def __init__(self, seed: TrialSeed):
        self.internal_seed = seed
        super().__init__(np.random.PCG64(seed.sequence()))


class TrialSeed:
    """
    This class represents the seed of a single random stream.

    It takes the experiment seed, a trial index and a stream and provides the
    SeedSequence the PCG64 generator is built from. The trial index and stream
    are packed into a single integer so a stream can be named in manifests and
    logs, similar to how snowflake ids pack a timestamp above a few flag bits.
    The lowest STREAM_BITS bits hold the stream, everything above is the trial.
    """

    STREAM_BITS = 8

    def __init__(self, seed: int, trial: int, stream: Stream = Stream.graph):
        if trial < 0:
            raise ValueError("trial index must be non-negative")
        self.seed = int(seed) & _SEED_MASK
        self.trial = int(trial)
        self.stream = Stream(stream)

    def __int__(self):
        return (self.trial << self.STREAM_BITS) + int(self.stream)

    def __index__(self):
        return int(self)

    def __repr__(self):
        return f"<TrialSeed seed={self.seed} trial={self.trial} stream={self.stream.name}>"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrialSeed):
            return False
        return self.seed == other.seed and int(self) == int(other)

    def __hash__(self):
        return hash((self.seed, int(self)))

    @property
    def spawn_key(self):
        return (self.trial, int(self.stream))

    def sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)

    def generator(self) -> Random:
        return Random(self)
