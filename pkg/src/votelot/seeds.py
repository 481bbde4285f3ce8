"""Named, reproducible random substreams.

Every randomized operation in the package draws from a substream keyed by
(seed, label, indices). Substreams are independent and stable across runs
and platforms, so a single top-level seed makes whole experiments
reproducible while letting replicates run in any order.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream"]


def substream(seed: int, label: str, *indices: int) -> np.random.Generator:
    """Return the generator for the (seed, label, *indices) substream."""
    key = zlib.crc32(label.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(key, *indices))
    return np.random.Generator(np.random.PCG64(ss))
