"""Deterministic random-stream splitting.

Every run owns a single integer seed. Independent components (init,
sampling, splits, demos) derive their own streams from that seed plus a
string label, so adding a consumer never perturbs the draws of another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *labels: str) -> np.random.Generator:
    """Return a generator for `seed` split by the given labels.

    Streams for distinct label tuples are statistically independent; the
    same (seed, labels) pair always yields the same draw sequence.
    """
    keys = tuple(_label_key(label) for label in labels)
    seq = np.random.SeedSequence(entropy=seed, spawn_key=keys)
    return np.random.Generator(np.random.Philox(seq))
