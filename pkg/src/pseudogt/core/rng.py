"""Seed derivation.

Every random draw in the package comes from one 64-bit master seed.  Named
streams are derived with the splitmix64 finalizer so that adding a new
consumer never perturbs the draws of an existing one.
"""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One step of the splitmix64 generator; returns ``(next_state, output)``."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def _name_key(name):
    return int.from_bytes(hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest(), "little")


def derive_seed(seed, *names):
    """Child seed for the stream ``seed/names[0]/names[1]/...``."""
    state = int(seed) & MASK64
    for name in names:
        state, out = splitmix64(state ^ _name_key(str(name)))
        state = out
    return state


def stream(seed, *names):
    """A numpy ``Generator`` for a named stream of ``seed``."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *names)))
