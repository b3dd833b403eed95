"""Link-prediction ranking protocol and precision-recall metrics.

For every test triple, both the subject and the object slot are queried:
all entities are substituted into the slot, scored, and ranked in
decreasing score order. In the filtered mode, candidates that form a
known-true triple (anywhere in train/valid/test) are removed first,
except the test entity itself. Ties share a mid-rank so a constant
scorer cannot inflate the metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import TripleStore
from .exceptions import EmptySplit, IndexOutOfRange, NoPositives
from .models import EmbeddingSet, ModelSpec, score_all_candidates

RAW = "raw"
FILTERED = "filtered"
HITS_LEVELS = (1, 3, 10)


@dataclass
class RankingReport:
    """Raw and filtered MRR plus Hits@{1,3,10} percentages."""

    mrr_filtered: float
    mrr_raw: float
    hits_at: dict[int, float]
    hits_at_raw: dict[int, float]
    n_queries: int
    per_relation: dict[str, dict[str, float]] | None = None

    def to_dict(self) -> dict:
        out = {
            "mrr_filtered": self.mrr_filtered,
            "mrr_raw": self.mrr_raw,
            "hits_at": {str(k): v for k, v in self.hits_at.items()},
            "hits_at_raw": {str(k): v for k, v in self.hits_at_raw.items()},
            "n_queries": self.n_queries,
        }
        if self.per_relation is not None:
            out["per_relation"] = self.per_relation
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self, label: str = "model") -> str:
        """Aligned text table: MRR filter/raw plus filtered Hits levels."""
        header = f"{'Method':<12} {'MRR-Filter':>10} {'MRR-Raw':>8} " + " ".join(f"{'@' + str(n):>6}" for n in HITS_LEVELS)
        row = f"{label:<12} {self.mrr_filtered:>10.3f} {self.mrr_raw:>8.3f} " + " ".join(
            f"{self.hits_at[n]:>6.1f}" for n in HITS_LEVELS
        )
        return header + "\n" + row


def _rank_with_ties(scores: np.ndarray, true_score: float) -> float:
    greater = int(np.count_nonzero(scores > true_score))
    tied_others = int(np.count_nonzero(scores == true_score)) - 1
    return 1.0 + greater + tied_others / 2.0


def rank_entity_candidates(
    spec: ModelSpec,
    params: EmbeddingSet,
    triple,
    slot: str,
    store: TripleStore,
    mode: str = FILTERED,
    scores: np.ndarray | None = None,
) -> float:
    """Rank of the true entity among all substitutions of one slot.

    Rank uses the mid-tie rule: 1 + (#strictly better) + (#ties)/2. In
    filtered mode, candidates other than the true entity whose
    substitution is a known-true triple are excluded before ranking.
    `scores` lets callers reuse one candidate-score vector for both modes.
    """
    if mode not in (RAW, FILTERED):
        raise ValueError(f"mode must be {RAW!r} or {FILTERED!r}")
    s, p, o = (int(x) for x in triple)
    true_entity = s if slot == "subject" else o
    fixed = o if slot == "subject" else s
    if scores is None:
        scores = score_all_candidates(spec, params, p, fixed, slot)
    if not (0 <= true_entity < scores.shape[0]):
        raise IndexOutOfRange(f"entity id {true_entity} out of range")
    true_score = float(scores[true_entity])
    if mode == RAW:
        return _rank_with_ties(scores, true_score)
    known = store.known_subjects.get((p, fixed)) if slot == "subject" else store.known_objects.get((p, fixed))
    if not known or known == {true_entity}:
        return _rank_with_ties(scores, true_score)
    drop = np.fromiter((e for e in known if e != true_entity), dtype=np.int64)
    keep = np.ones(scores.shape[0], dtype=bool)
    keep[drop] = False
    return _rank_with_ties(scores[keep], true_score)


def evaluate_link_prediction(
    spec: ModelSpec,
    params: EmbeddingSet,
    store: TripleStore,
    split: str = "test",
    per_relation: bool = True,
) -> RankingReport:
    """Run both-slot ranking over a split and aggregate MRR / Hits@n."""
    triples = store.split(split)
    if triples.shape[0] == 0:
        raise EmptySplit(f"{split} split is empty")
    raw_ranks = np.empty(2 * triples.shape[0])
    filt_ranks = np.empty(2 * triples.shape[0])
    rel_ids = np.empty(2 * triples.shape[0], dtype=np.int64)
    i = 0
    for s, p, o in triples:
        for slot in ("subject", "object"):
            fixed = o if slot == "subject" else s
            scores = score_all_candidates(spec, params, int(p), int(fixed), slot)
            raw_ranks[i] = rank_entity_candidates(spec, params, (s, p, o), slot, store, RAW, scores=scores)
            filt_ranks[i] = rank_entity_candidates(spec, params, (s, p, o), slot, store, FILTERED, scores=scores)
            rel_ids[i] = p
            i += 1

    def summarize(f: np.ndarray, r: np.ndarray) -> tuple[float, float, dict[int, float], dict[int, float]]:
        return (
            float(np.mean(1.0 / f)),
            float(np.mean(1.0 / r)),
            {n: float(np.mean(f <= n) * 100.0) for n in HITS_LEVELS},
            {n: float(np.mean(r <= n) * 100.0) for n in HITS_LEVELS},
        )

    mrr_f, mrr_r, hits_f, hits_r = summarize(filt_ranks, raw_ranks)
    per_rel = None
    if per_relation:
        per_rel = {}
        for rid in np.unique(rel_ids):
            m = rel_ids == rid
            f, r, hf, _ = summarize(filt_ranks[m], raw_ranks[m])
            per_rel[store.relations.names[int(rid)]] = {
                "mrr_filtered": f,
                "mrr_raw": r,
                **{f"hits_at_{n}": v for n, v in hf.items()},
                "n_queries": int(np.count_nonzero(m)),
            }
    return RankingReport(
        mrr_filtered=mrr_f,
        mrr_raw=mrr_r,
        hits_at=hits_f,
        hits_at_raw=hits_r,
        n_queries=int(raw_ranks.shape[0]),
        per_relation=per_rel,
    )


def auc_pr(scores, labels) -> float:
    """Area under the precision-recall curve as average precision.

    Items are ranked by score descending with ties kept in input order
    (stable sort); AP = sum_k precision@k * delta-recall@k, i.e. the mean
    of precision at each positive's position. Step interpolation only.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d and the same length")
    positives = labels > 0
    n_pos = int(np.count_nonzero(positives))
    if n_pos == 0:
        raise NoPositives("average precision needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    hits = positives[order].astype(np.float64)
    precision_at = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float(np.sum(precision_at * hits) / n_pos)
