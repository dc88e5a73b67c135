"""Deterministic, named random streams.

Every random draw in the library comes from a Philox4x64-10 counter-based
generator keyed by the first 128 bits of SHA-256("{seed}:{index}:{tag}").
The derivation is part of the reproducibility contract: a reimplementation
that keys Philox the same way reproduces every experiment bit for bit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed: int, index: int = 0, tag: str = "") -> np.random.Generator:
    """Return the named generator for (seed, index, tag)."""
    label = f"{seed}:{index}:{tag}".encode("ascii")
    digest = hashlib.sha256(label).digest()
    key = np.frombuffer(digest[:16], dtype="<u8")
    return np.random.Generator(np.random.Philox(key=key))


def as_generator(seed_or_rng: int | np.random.Generator, tag: str = "") -> np.random.Generator:
    """Accept either an integer seed or an existing generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return stream(int(seed_or_rng), 0, tag)
