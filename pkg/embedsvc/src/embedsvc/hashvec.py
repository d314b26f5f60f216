"""Deterministic test-mode vectors: counter-mode SHA-256 expansion.

This must stay wire-compatible with the retrieval engine's offline stub
provider: same (seed, text) keying, same block layout, same normalization.
Integration tests on both sides pin the exact values, so any change here is
a contract break.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np


def hash_embedding(text: str, dim: int = 512, seed: int = 0) -> np.ndarray:
    """Unit vector: each SHA-256 digest block yields four uint64s in [-1, 1)."""
    key = f"{seed}:{text}".encode("utf-8")
    values = np.empty(dim, dtype=np.float64)
    filled = 0
    block = 0
    while filled < dim:
        digest = hashlib.sha256(key + block.to_bytes(8, "little")).digest()
        for (word,) in struct.iter_unpack("<Q", digest):
            if filled == dim:
                break
            values[filled] = word / 2.0**63 - 1.0
            filled += 1
        block += 1
    norm = float(np.linalg.norm(values))
    if norm < 1e-12:
        values[0] = 1.0
        norm = 1.0
    return values / norm
