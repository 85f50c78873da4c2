"""Per-trial random streams.

Trial ``k`` of a campaign seeded with ``base_seed`` draws from
``numpy.random.Generator(PCG64(trial_seed(base_seed, k)))``, so any trial
can be replayed on its own. The seed derivation is the splitmix64
finalizer applied twice::

    mix(x)  = splitmix64 finalizer of (x + 0x9E3779B97F4A7C15) mod 2^64
    seed_k  = mix(mix(base_seed) XOR k)

with the finalizer ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`` (all mod 2^64).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def trial_seed(base_seed: int, k: int) -> int:
    return splitmix64(splitmix64(base_seed & _MASK) ^ (k & _MASK))


def trial_stream(base_seed: int, k: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(trial_seed(base_seed, k)))
