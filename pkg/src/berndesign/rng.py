"""Keyed counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, *tags)``. Streams with
different tags are independent by key separation, so adding replicates or
reordering work never perturbs another stream.
"""

import hashlib

import numpy as np

DEFAULT_SEED = 0x0B3D_0001
MASK64 = (1 << 64) - 1


def _tag_word(tag) -> int:
    if isinstance(tag, (int, np.integer)) and not isinstance(tag, bool):
        return int(tag) & MASK64
    digest = hashlib.blake2b(str(tag).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *tags) -> np.random.Generator:
    """Independent generator for ``(seed, *tags)``."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & MASK64, spawn_key=tuple(_tag_word(t) for t in tags)
    )
    return np.random.Generator(np.random.Philox(ss))
