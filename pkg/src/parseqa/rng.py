"""Seed derivation and the portable PRNG used by all synthesis code.

The generator is numpy's PCG64, fixed by config so that datasets are
reproducible across machines. Per-case streams are derived by hashing
(dataset_seed, case_id, error_type_id) with BLAKE2b.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(dataset_seed: int, *parts: str) -> int:
    """64-bit stream seed from the dataset seed and string identifiers."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(dataset_seed).to_bytes(8, "little", signed=False))
    for part in parts:
        h.update(b"\x1f")
        h.update(part.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
