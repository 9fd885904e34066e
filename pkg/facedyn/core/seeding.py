import numpy as np


def sub_seed(seed: int, *keys: int) -> int:
    """Independent 32-bit seed for (seed, *keys); stable across runs and schedules."""
    return int(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]).generate_state(1)[0])


def rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]))
