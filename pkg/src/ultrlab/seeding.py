"""Stable sub-seed derivation so every random stream hangs off one master seed."""

import hashlib

import numpy as np


def derive_seed(master_seed: int, *parts) -> int:
    """Derive a child seed from a master seed and a label path.

    The derivation is a stable hash of the textual representation of
    ``(master_seed, *parts)``, so streams for different components
    (e.g. ``("clicks", step, query_id)``) are independent of each other
    and of the order in which components consume randomness.
    """
    key = "\x1f".join(str(p) for p in (master_seed, *parts))
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def rng_for(master_seed: int, *parts) -> np.random.Generator:
    """A fresh numpy Generator seeded from ``derive_seed(master_seed, *parts)``."""
    return np.random.default_rng(derive_seed(master_seed, *parts))
