"""Seeded, splittable generators built on the counter-based Philox bit generator."""
import numpy as np


def make_rng(seed):
    """Return a Generator for ``seed`` (an int, SeedSequence, or existing Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def spawn(seed, k):
    """Return ``k`` independent generators derived from one master seed."""
    return [make_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(k)]
