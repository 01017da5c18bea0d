"""
Reproducibility utilities.

Every random stream in a run is derived from one master seed:

    derive_seed(master, stream, index, ...) = SeedSequence([master, stream, index, ...])

Stream ids below are part of the output format; changing one changes
every result that depends on it.
"""

import numpy as np

STREAM_GEOMETRY = 1
STREAM_SWEEP = 2
STREAM_SURVEY = 3
STREAM_MISSION = 4


def derive_seed(master: int, *keys: int) -> np.random.SeedSequence:
    """Stable child seed for (master, *keys)"""
    if master < 0 or any(k < 0 for k in keys):
        raise ValueError("Seeds and keys must be non-negative integers")
    return np.random.SeedSequence([int(master), *(int(k) for k in keys)])


def get_rng(seed, *keys: int) -> np.random.Generator:
    """Generator for a master seed (int) or an already derived SeedSequence"""
    if isinstance(seed, np.random.SeedSequence):
        if keys:
            raise ValueError("Derive keys from the integer master seed, not from a SeedSequence")
        return np.random.default_rng(seed)
    return np.random.default_rng(derive_seed(int(seed), *keys))
