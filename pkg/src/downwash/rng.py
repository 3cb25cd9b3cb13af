"""Deterministic random-stream plumbing.

All randomness in the package flows from one integer seed through named
substreams.  Streams are backed by the counter-based Philox generator keyed
with two 64-bit words (seed, stream index), which is documented, portable
and bit-reproducible across platforms; independent stream indices may be
drawn from in parallel without affecting each other.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = 2**64


def substream_seed(seed: int, label: str) -> int:
    """Derive a 64-bit child seed from (seed, label) via SHA-256.

    Used to give each pipeline stage (dataset generation, weight init,
    shuffling) its own independent stream family.
    """
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(seed: int, stream_index: int = 0) -> np.random.Generator:
    """A fresh generator keyed by (seed, stream_index)."""
    key = np.array([seed % _U64, stream_index % _U64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
