"""Seed derivation helpers for reproducible, splittable randomness."""

from __future__ import annotations

import hashlib

import numpy as np


def child_seed(root: int, *tags) -> int:
    """Derive a stable 63-bit seed from a root seed and a tag path.

    Tags may be ints or strings. Uses sha256 so the mapping is identical
    across processes and platforms (unlike builtin hash()).
    """
    h = hashlib.sha256()
    h.update(str(int(root)).encode())
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest()[:8], "little") & 0x7FFFFFFFFFFFFFFF


def child_rng(root: int, *tags) -> np.random.Generator:
    return np.random.default_rng(child_seed(root, *tags))
