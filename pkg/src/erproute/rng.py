"""Named random substreams derived from a single user-facing seed.

Every source of randomness in the package draws from ``substream(seed, ...)``
with a stable label, so individual stages (splitting, label draws,
permutations, synthetic generation) are reproducible in isolation and
independent of each other.
"""

import hashlib

import numpy as np


def substream(seed: int, *labels: object) -> np.random.Generator:
    """Generator keyed by ``(seed, labels)``, stable across runs and platforms.

    Labels are hashed through SHA-256, so any printable label (strings, ints,
    floats) yields the same stream everywhere.
    """
    entropy = [seed % 2**64]
    for label in labels:
        digest = hashlib.sha256(repr(label).encode("utf-8")).digest()
        entropy.extend(
            int.from_bytes(digest[i : i + 8], "little") for i in range(0, 32, 8)
        )
    return np.random.default_rng(np.random.SeedSequence(entropy))
