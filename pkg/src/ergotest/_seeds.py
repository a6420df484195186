"""Stable derivation of task seeds from a master seed and task labels."""

from __future__ import annotations

import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(master: int, *labels) -> int:
    """Hash ``(master, *labels)`` into a 64-bit seed.

    Independent of ``PYTHONHASHSEED`` and of evaluation order, so concurrent
    or reordered tasks draw identical streams.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master) & SEED_MASK).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & SEED_MASK)
