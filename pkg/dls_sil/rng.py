"""
Named random streams.

Every consumer draws from its own PCG64 stream derived from the experiment
seed and a purpose key, so the workload and each perturbation category stay
independent of one another.
"""

import numpy as np

PURPOSES = {
    "workload": 1,
    "availability": 2,
    "bandwidth": 3,
    "latency": 4,
}


def stream(seed: int, purpose: str) -> np.random.Generator:
    """Return the generator for ``purpose`` under ``seed``"""
    if purpose not in PURPOSES:
        raise KeyError(f"unknown random stream '{purpose}'")
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError(f"seed {seed} is not an unsigned 64-bit integer")
    sequence = np.random.SeedSequence(seed, spawn_key=(PURPOSES[purpose],))
    return np.random.Generator(np.random.PCG64(sequence))
