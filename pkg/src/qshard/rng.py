"""Named, splittable random streams derived from one base seed.

Each consumer asks for its own stream by key, so adding draws in one place
never shifts the numbers seen somewhere else.
"""

import numpy as np

XGUESS = 1
MEASURE = 2
NOISE = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))
