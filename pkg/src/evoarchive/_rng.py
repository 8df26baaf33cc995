"""Deterministic RNG derivation for reproducible runs."""
from __future__ import annotations

import hashlib
import random


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed from a path of labels (platform-independent)."""
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(*parts: object) -> random.Random:
    """Fresh generator seeded from a path of labels."""
    return random.Random(derive_seed(*parts))
