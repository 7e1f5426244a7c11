import numpy as np

# stream tags keep the independent random draws of a run apart
ENCODER = 1
KEY = 2
PROMPT = 3
DATA = 4


def generator(seed: int, *words: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``seed`` and extra words."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, words)])))
