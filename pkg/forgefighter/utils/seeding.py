"""
Deterministic seed derivation.

Every random draw in the system is driven by a generator seeded from a stable
64-bit hash of (global seed, image id, epoch, slot).
"""

import hashlib
from dataclasses import dataclass

import numpy as np

SEED_BYTES = 8


@dataclass(frozen=True)
class SeedDerivation:
    global_seed: int
    image_id: str
    epoch: int
    slot: int


def derive_seed(derivation):
    """
    Stable 64-bit seed for a derivation record.

    Args:
        derivation: SeedDerivation

    Returns:
        int: Unsigned 64-bit seed
    """
    key = (
        f"{int(derivation.global_seed)}\x1f{derivation.image_id}\x1f"
        f"{int(derivation.epoch)}\x1f{int(derivation.slot)}"
    )
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=SEED_BYTES).digest()
    return int.from_bytes(digest, "little")


def seed_for(global_seed, image_id, epoch=0, slot=0):
    """Shorthand for derive_seed(SeedDerivation(...))."""
    return derive_seed(SeedDerivation(global_seed, str(image_id), epoch, slot))


def make_rng(seed):
    """Fresh generator for one call; generators are never shared."""
    return np.random.default_rng(int(seed))
