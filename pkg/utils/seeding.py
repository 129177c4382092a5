"""
Deterministic seed fan-out.

A master seed is combined with a purpose tag (e.g. ``("attack", "eps=0.1")``)
so that each consumer gets an independent stream; adding a new consumer never
shifts the randomness of the existing ones.
"""

import hashlib
from typing import Any

import numpy as np


def derive_seed(master_seed: int, *tags: Any) -> int:
    """Return a 63-bit sub-seed for ``(master_seed, *tags)``."""
    key = "/".join([str(int(master_seed))] + [str(tag) for tag in tags])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def make_rng(master_seed: int, *tags: Any) -> np.random.Generator:
    """Return a numpy Generator seeded from ``derive_seed``."""
    return np.random.default_rng(derive_seed(master_seed, *tags))
