from enum import IntEnum, unique

import numpy as np


@unique
class StreamPurpose(IntEnum):
    STRATEGIES = 0
    SCORES = 1
    SIGNALS = 2
    NOISE = 3
    CHOICES = 4
    SPOT_CHECKS = 5
    SAMPLING = 6


def random_stream(seed: int, purpose: StreamPurpose, *key: int) -> np.random.Generator:
    """Counter-based (Philox) stream for one purpose of one run, independent of every other (seed, purpose, key)."""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(int(purpose), *key))
    return np.random.Generator(np.random.Philox(sequence))
