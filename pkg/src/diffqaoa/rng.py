"""Seed plumbing. Every randomized routine takes an explicit integer seed."""

import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for ``(seed, *keys)``; independent streams per key path."""
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def entropy_seed() -> int:
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint32)[0])
