"""Per-task random streams derived from a master seed.

Each stream is a Philox counter-based generator keyed by the master seed
and a task index, so replicate ``k`` draws the same numbers whether it
runs first, last or in another process.
"""

import numpy as np


def stream(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))
