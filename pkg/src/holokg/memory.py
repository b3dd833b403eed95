"""Holographic associative memory: convolution storage, correlation retrieval.

A trace stores key/value pairs by superposing their circular
convolutions; correlating the trace with a key returns an approximation
of the paired value, which a clean-up table (nearest stored item by dot
product) can denoise. Retrieval is exact when the key is the convolution
identity [1, 0, ..., 0] and statistical otherwise, degrading as more
pairs share one trace.

The same construction applies to relational data: an object entity can
hold the superposition of convolve(relation, subject) over all of its
observed facts, and correlating with a subject approximately retrieves
the relations linking the two. That stored term equals the object-side
score gradient of the correlation scorer, which is what ties the scoring
model to this memory scheme.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, EmptyTable, ObjectMismatch
from .models import EmbeddingSet
from .ops import cconv, ccorr
from .rng import substream


@dataclass
class MemoryTrace:
    trace: np.ndarray
    stored_count: int


@dataclass
class CleanupTable:
    """Items searched by highest dot product; ties go to the lowest id."""

    ids: list[int]
    vectors: np.ndarray  # (n, d)

    @classmethod
    def from_pairs(cls, items: list[tuple[int, np.ndarray]]) -> "CleanupTable":
        if not items:
            raise EmptyTable("clean-up table has no items")
        ids = [int(i) for i, _ in items]
        vectors = np.stack([np.asarray(v, dtype=np.float64) for _, v in items])
        return cls(ids=ids, vectors=vectors)


def store_pairs(pairs: list[tuple[np.ndarray, np.ndarray]], dim: int | None = None) -> MemoryTrace:
    """Superpose convolve(key, value) over all pairs into one trace."""
    if not pairs:
        if dim is None:
            raise DimensionMismatch("empty pair list needs an explicit dim")
        return MemoryTrace(trace=np.zeros(dim, dtype=np.float64), stored_count=0)
    d = np.asarray(pairs[0][0]).shape[0]
    trace = np.zeros(d, dtype=np.float64)
    for key, value in pairs:
        trace += cconv(key, value)
    return MemoryTrace(trace=trace, stored_count=len(pairs))


def retrieve(m: MemoryTrace, key: np.ndarray) -> np.ndarray:
    """Correlate the key against the trace; returns the noisy value."""
    return ccorr(key, m.trace)


def cleanup(noisy: np.ndarray, table: CleanupTable) -> tuple[int, np.ndarray]:
    """Return the stored (id, vector) with the highest dot product to `noisy`."""
    if table.vectors.shape[0] == 0:
        raise EmptyTable("clean-up table has no items")
    noisy = np.asarray(noisy, dtype=np.float64)
    if noisy.shape != (table.vectors.shape[1],):
        raise DimensionMismatch(f"query shape {noisy.shape} vs table dim {table.vectors.shape[1]}")
    sims = table.vectors @ noisy
    best = int(np.argmax(sims))  # argmax returns the first (lowest-id) maximum
    return table.ids[best], table.vectors[best]


def store_relational(triples, params: EmbeddingSet, obj: int) -> np.ndarray:
    """Superpose convolve(relation, subject) for all facts about one object."""
    d = params.entities.shape[1]
    out = np.zeros(d, dtype=np.float64)
    for s, p, o in triples:
        if int(o) != int(obj):
            raise ObjectMismatch(f"triple {(s, p, o)} does not have object {obj}")
        out += cconv(params.relations[int(p)], params.entities[int(s)])
    return out


def random_unit_vectors(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """I.i.d. normal entries with variance 1/d, renormalized to unit L2.

    Vectors drawn this way approximately self-invert under correlation
    (correlate(a, a) is close to the convolution identity), which is the
    condition that makes trace retrieval work.
    """
    v = rng.normal(0.0, 1.0 / np.sqrt(d), size=(n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def capacity_sweep(d: int, ks: tuple[int, ...], trials: int, seed: int) -> list[dict]:
    """Seeded retrieval-quality sweep over trace loads.

    For each trial and load k: store k random unit pairs, retrieve every
    key, and record the cosine to the true value plus whether clean-up
    over the stored values picks the right one. One row per stored pair:
    keys d, k, trial, cosine, cleanup_correct.
    """
    rows: list[dict] = []
    for k in ks:
        rng = substream(seed, "capacity", f"d={d}", f"k={k}")
        for trial in range(trials):
            keys = random_unit_vectors(rng, k, d)
            values = random_unit_vectors(rng, k, d)
            trace = store_pairs(list(zip(keys, values)))
            table = CleanupTable(ids=list(range(k)), vectors=values)
            for i in range(k):
                noisy = retrieve(trace, keys[i])
                got, _ = cleanup(noisy, table)
                rows.append(
                    {
                        "d": d,
                        "k": k,
                        "trial": trial,
                        "cosine": _cosine(noisy, values[i]),
                        "cleanup_correct": int(got == i),
                    }
                )
    return rows


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["d", "k", "trial", "cosine", "cleanup_correct"], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({**row, "cosine": f"{row['cosine']:.6f}"})
    return buf.getvalue()
