"""Named deterministic random streams derived from one root seed.

Every source of randomness in the package draws from a stream obtained via
`substream(seed, label)`, so individual pipeline stages are reproducible in
isolation and runs are bit-identical for equal seeds.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, label: str) -> np.random.Generator:
    """Generator for the sub-stream `label` of the root `seed`."""
    tag = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
