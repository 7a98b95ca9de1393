"""Positional random streams.

Every random draw in the package comes from a Philox generator keyed by
``(master seed, role tag, *indices)``.  A draw therefore depends only on its
position, never on how many draws happened before it, which keeps parallel
and sequential runs bit-identical.
"""
from __future__ import annotations

import hashlib

import numpy as np

SEED_BITS = 64


def _tag_code(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**SEED_BITS:
        raise ValueError(f"seed must be a {SEED_BITS}-bit unsigned integer, got {seed}")
    return seed


def stream(seed: int, tag: str, *index: int) -> np.random.Generator:
    """Independent generator for one ``(seed, tag, index)`` position."""
    entropy = [check_seed(seed), _tag_code(tag), *(int(i) for i in index)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, tag: str, *index: int) -> int:
    """A fresh 64-bit seed for a sub-experiment at the given position."""
    return int(stream(seed, tag, *index).integers(0, 2**SEED_BITS, dtype=np.uint64))
