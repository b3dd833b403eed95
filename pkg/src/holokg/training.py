"""Losses, negative sampling, AdaGrad updates, and the training loop.

Two objectives are supported. The pairwise ranking loss (default) pushes
the probability of an observed triple above the probability of its
corruptions by a margin:

    sum over (pos, neg) pairs of max(0, margin + sigmoid(eta_neg) - sigmoid(eta_pos))

Note the hinge is applied to the probabilities, not the raw scores; a
config flag switches to raw-score hinging. The pointwise logistic loss

    sum_i log(1 + exp(-y_i * eta_i)) + l2 * ||params||^2

treats corruptions as explicit negatives (y = -1). Optimization is
mini-batch SGD with per-entry AdaGrad scaling and strictly sparse
updates: only rows touched by a batch change, everything else is
bit-identical afterwards. Entity/relation norms can be capped by
projection after every step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .countries import LabeledTriple
from .data import TripleStore, Triple
from .evaluation import auc_pr, evaluate_link_prediction
from .exceptions import EmptySplit, ExhaustedRetries, NonFiniteInput, ShapeMismatch
from .models import (
    EmbeddingSet,
    GradientBatch,
    ModelSpec,
    gradient_batch,
    init_params,
    score_batch,
    sigmoid,
)
from .rng import substream

MAX_SAMPLE_RETRIES = 100


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "ranking"  # "ranking" | "logistic"
    margin: float = 0.2
    l2: float = 0.0
    learning_rate: float = 0.1
    adagrad_eps: float = 1e-8
    negatives: int = 1
    batch_size: int = 128
    max_epochs: int = 500
    patience: int = 5
    eval_every: int = 10
    eval_sample: int | None = None
    entity_norm: float | None = 1.0
    relation_norm: float | None = None
    hinge_on_raw: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.loss not in ("ranking", "logistic"):
            raise ValueError(f"loss must be 'ranking' or 'logistic', got {self.loss!r}")
        if self.loss == "ranking" and self.margin <= 0:
            raise ValueError("ranking loss requires margin > 0")
        if self.learning_rate <= 0 or self.adagrad_eps <= 0:
            raise ValueError("learning_rate and adagrad_eps must be > 0")
        if self.negatives < 1 or self.batch_size < 1:
            raise ValueError("negatives and batch_size must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        for c in (self.entity_norm, self.relation_norm):
            if c is not None and c <= 0:
                raise ValueError("norm constraints must be > 0 when set")


def logistic_loss(scored, params_norm_sq: float = 0.0, l2: float = 0.0) -> float:
    """Regularized logistic loss over (score, label) pairs, overflow-safe."""
    total = l2 * params_norm_sq
    if len(scored) == 0:
        return float(total)
    arr = np.asarray(scored, dtype=np.float64)
    eta, y = arr[:, 0], arr[:, 1]
    return float(np.sum(np.logaddexp(0.0, -y * eta)) + total)


def ranking_loss(pos, neg, margin: float, on_raw: bool = False) -> float:
    """Pairwise hinge over all positive x negative score combinations."""
    if margin <= 0:
        raise ValueError("margin must be > 0")
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if not on_raw:
        pos, neg = sigmoid(pos), sigmoid(neg)
    hinge = margin + neg[None, :] - pos[:, None]
    return float(np.sum(np.maximum(0.0, hinge)))


def sample_negatives(positive, store: TripleStore, n: int, rng: np.random.Generator) -> list[Triple]:
    """Corrupt one uniformly chosen slot of `positive` with a uniform entity.

    Candidates that are training triples are rejected and re-drawn
    (local closed-world assumption); after MAX_SAMPLE_RETRIES straight
    collisions the relation is treated as saturated and sampling fails.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if store.n_entities < 2:
        raise ValueError("need at least 2 entities to corrupt")
    s, p, o = (int(x) for x in positive)
    out: list[Triple] = []
    for _ in range(n):
        for _attempt in range(MAX_SAMPLE_RETRIES):
            corrupt_subject = bool(rng.integers(2))
            e = int(rng.integers(store.n_entities))
            cand = (e, p, o) if corrupt_subject else (s, p, e)
            if cand not in store.train_set:
                out.append(Triple(*cand))
                break
        else:
            raise ExhaustedRetries(
                f"{MAX_SAMPLE_RETRIES} corruption draws for {(s, p, o)} all hit known positives"
            )
    return out


@dataclass
class AdaGradState:
    """Accumulated squared gradients, one cell per parameter entry."""

    entities: np.ndarray
    relations: np.ndarray
    shared: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: EmbeddingSet) -> "AdaGradState":
        shared = {}
        if params.proj is not None:
            shared["proj"] = np.zeros_like(params.proj)
        if params.out is not None:
            shared["out"] = np.zeros_like(params.out)
        return cls(
            entities=np.zeros_like(params.entities),
            relations=np.zeros_like(params.relations),
            shared=shared,
        )


def _sparse_row_update(
    param_block: np.ndarray,
    acc_block: np.ndarray,
    index: np.ndarray,
    grads: np.ndarray,
    lr: float,
    eps: float,
) -> np.ndarray:
    """Aggregate duplicate rows, then apply AdaGrad to the touched rows only."""
    uniq, inverse = np.unique(index, return_inverse=True)
    gsum = np.zeros((uniq.shape[0],) + grads.shape[1:], dtype=np.float64)
    np.add.at(gsum, inverse, grads)
    acc_new = acc_block[uniq] + gsum * gsum
    step = np.zeros_like(gsum)
    mask = gsum != 0.0
    np.divide(lr * gsum, np.sqrt(acc_new) + eps, out=step, where=mask)
    if not np.isfinite(step).all():
        raise NonFiniteInput("AdaGrad update produced NaN/Inf; step aborted")
    acc_block[uniq] = acc_new
    param_block[uniq] -= step
    return uniq


def adagrad_step(
    params: EmbeddingSet,
    grads: GradientBatch,
    state: AdaGradState,
    learning_rate: float,
    eps: float,
) -> tuple[np.ndarray, np.ndarray]:
    """In-place sparse AdaGrad step; returns touched (entity, relation) rows.

    For each touched entry: acc += g^2, then theta -= lr * g / (sqrt(acc) + eps).
    Entries with zero gradient (and all untouched rows) stay bit-identical.
    The update is validated before anything mutates, so a non-finite
    gradient aborts the whole step.
    """
    if grads.entity_grads.shape[1:] != params.entities.shape[1:]:
        raise ShapeMismatch("entity gradient rows do not match entity vectors")
    if grads.relation_grads.shape[1:] != params.relations.shape[1:]:
        raise ShapeMismatch("relation gradient rows do not match relation parameters")
    touched_e = np.empty(0, dtype=np.int64)
    touched_r = np.empty(0, dtype=np.int64)
    if grads.entity_index.size:
        touched_e = _sparse_row_update(
            params.entities, state.entities, grads.entity_index, grads.entity_grads, learning_rate, eps
        )
    if grads.relation_index.size:
        touched_r = _sparse_row_update(
            params.relations, state.relations, grads.relation_index, grads.relation_grads, learning_rate, eps
        )
    for name, g in grads.shared.items():
        block = getattr(params, name)
        acc = state.shared[name]
        acc_new = acc + g * g
        step = np.zeros_like(g)
        mask = g != 0.0
        np.divide(learning_rate * g, np.sqrt(acc_new) + eps, out=step, where=mask)
        if not np.isfinite(step).all():
            raise NonFiniteInput("AdaGrad update produced NaN/Inf; step aborted")
        acc[...] = acc_new
        block -= step
    return touched_e, touched_r


def _project_rows(block: np.ndarray, limit: float, rows: np.ndarray | None = None) -> None:
    view = block if rows is None else block[rows]
    flat = view.reshape(view.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    over = norms > limit
    if np.any(over):
        flat[over] *= (limit / norms[over])[:, None]
        if rows is not None:
            block[rows] = flat.reshape(view.shape)


def project_norms(params: EmbeddingSet, entity_norm: float | None, relation_norm: float | None) -> None:
    """Rescale any vector outside its norm ball onto the sphere of radius C."""
    if entity_norm is not None:
        _project_rows(params.entities, entity_norm)
    if relation_norm is not None:
        _project_rows(params.relations, relation_norm)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_metric: float | None
    seconds: float


@dataclass
class TrainResult:
    params: EmbeddingSet
    log: list[EpochRecord]
    best_epoch: int
    best_metric: float | None

    def log_csv(self) -> str:
        lines = ["epoch,loss,val_metric,seconds"]
        for r in self.log:
            val = "" if r.val_metric is None else f"{r.val_metric:.6f}"
            lines.append(f"{r.epoch},{r.loss:.6f},{val},{r.seconds:.3f}")
        return "\n".join(lines) + "\n"


def _merge_batches(parts: list[GradientBatch]) -> GradientBatch:
    shared: dict[str, np.ndarray] = {}
    for part in parts:
        for k, v in part.shared.items():
            shared[k] = shared[k] + v if k in shared else v
    return GradientBatch(
        entity_index=np.concatenate([p.entity_index for p in parts]),
        entity_grads=np.concatenate([p.entity_grads for p in parts], axis=0),
        relation_index=np.concatenate([p.relation_index for p in parts]),
        relation_grads=np.concatenate([p.relation_grads for p in parts], axis=0),
        shared=shared,
    )


def _validation_metric(
    spec: ModelSpec,
    params: EmbeddingSet,
    store: TripleStore,
    val_queries: list[LabeledTriple] | None,
    eval_triples: np.ndarray | None,
) -> float | None:
    if val_queries:
        S = np.fromiter((q.subject for q in val_queries), dtype=np.int64)
        P = np.fromiter((q.predicate for q in val_queries), dtype=np.int64)
        O = np.fromiter((q.object for q in val_queries), dtype=np.int64)
        labels = np.fromiter((q.label for q in val_queries), dtype=np.int64)
        return auc_pr(score_batch(spec, params, S, P, O), labels)
    if store.valid.shape[0] == 0:
        return None
    sub = store if eval_triples is None else _with_valid(store, eval_triples)
    report = evaluate_link_prediction(spec, params, sub, split="valid", per_relation=False)
    return report.mrr_filtered


def _with_valid(store: TripleStore, valid: np.ndarray) -> TripleStore:
    # Shallow view with a reduced valid split; indexes stay shared.
    return TripleStore(
        entities=store.entities,
        relations=store.relations,
        train=store.train,
        valid=valid,
        test=store.test,
        known_objects=store.known_objects,
        known_subjects=store.known_subjects,
        train_set=store.train_set,
    )


def train(
    spec: ModelSpec,
    config: TrainConfig,
    store: TripleStore,
    val_queries: list[LabeledTriple] | None = None,
) -> TrainResult:
    """Mini-batch SGD with AdaGrad, norm projection, and early stopping.

    Every positive is paired with `config.negatives` corruptions. The
    validation metric (filtered MRR on the valid split, or average
    precision when labeled `val_queries` are given) is computed every
    `eval_every` epochs; the best-scoring snapshot is returned. Training
    stops at `max_epochs` or after `patience` evaluations without
    improvement. Fully deterministic for a fixed config and seed.
    """
    n_train = store.train.shape[0]
    if n_train == 0:
        raise EmptySplit("training split is empty")
    params = init_params(spec, store.n_entities, store.n_relations, seed=config.seed)
    project_norms(params, config.entity_norm, config.relation_norm)
    state = AdaGradState.for_params(params)
    rng = substream(config.seed, "train")
    k = config.negatives

    eval_triples = None
    if val_queries is None and config.eval_sample is not None and store.valid.shape[0] > config.eval_sample:
        pick = substream(config.seed, "train", "eval-sample").permutation(store.valid.shape[0])[: config.eval_sample]
        eval_triples = store.valid[np.sort(pick)]

    log: list[EpochRecord] = []
    best_params = params.copy()
    best_metric: float | None = None
    best_epoch = 0
    evals_without_improvement = 0

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n_train)
        epoch_loss = 0.0
        for start in range(0, n_train, config.batch_size):
            batch = store.train[order[start : start + config.batch_size]]
            B = batch.shape[0]
            neg_rows = np.empty((B * k, 3), dtype=np.int64)
            for i in range(B):
                for j, t in enumerate(sample_negatives(batch[i], store, k, rng)):
                    neg_rows[i * k + j] = t
            S_p, P_p, O_p = batch[:, 0], batch[:, 1], batch[:, 2]
            S_n, P_n, O_n = neg_rows[:, 0], neg_rows[:, 1], neg_rows[:, 2]
            eta_p = score_batch(spec, params, S_p, P_p, O_p)
            eta_n = score_batch(spec, params, S_n, P_n, O_n)

            if config.loss == "ranking":
                eta_p_rep = np.repeat(eta_p, k)
                if config.hinge_on_raw:
                    viol = config.margin + eta_n - eta_p_rep
                    dpos_pair = -np.ones_like(eta_p_rep)
                    dneg_pair = np.ones_like(eta_n)
                else:
                    sp = sigmoid(eta_p_rep)
                    sn = sigmoid(eta_n)
                    viol = config.margin + sn - sp
                    dpos_pair = -(sp * (1.0 - sp))
                    dneg_pair = sn * (1.0 - sn)
                active = viol > 0.0
                epoch_loss += float(viol[active].sum())
                coeff_p = np.where(active, dpos_pair, 0.0).reshape(B, k).sum(axis=1)
                coeff_n = np.where(active, dneg_pair, 0.0)
            else:
                # pointwise logistic: d/d_eta log(1+exp(-y*eta)) = -y*sigmoid(-y*eta)
                epoch_loss += float(np.sum(np.logaddexp(0.0, -eta_p)) + np.sum(np.logaddexp(0.0, eta_n)))
                coeff_p = -sigmoid(-eta_p)
                coeff_n = sigmoid(eta_n)

            parts = []
            m_p = coeff_p != 0.0
            if np.any(m_p):
                parts.append(gradient_batch(spec, params, S_p[m_p], P_p[m_p], O_p[m_p], coeff_p[m_p]))
            m_n = coeff_n != 0.0
            if np.any(m_n):
                parts.append(gradient_batch(spec, params, S_n[m_n], P_n[m_n], O_n[m_n], coeff_n[m_n]))
            if config.loss == "logistic" and config.l2 > 0.0:
                ent_rows = np.unique(np.concatenate([S_p, O_p, S_n, O_n]))
                rel_rows = np.unique(P_p)
                reg = GradientBatch(
                    entity_index=ent_rows,
                    entity_grads=2.0 * config.l2 * params.entities[ent_rows],
                    relation_index=rel_rows,
                    relation_grads=2.0 * config.l2 * params.relations[rel_rows],
                    shared={
                        name: 2.0 * config.l2 * getattr(params, name)
                        for name in ("proj", "out")
                        if getattr(params, name) is not None
                    },
                )
                parts.append(reg)
            if not parts:
                continue
            touched_e, touched_r = adagrad_step(params, _merge_batches(parts), state, config.learning_rate, config.adagrad_eps)
            if config.entity_norm is not None and touched_e.size:
                _project_rows(params.entities, config.entity_norm, touched_e)
            if config.relation_norm is not None and touched_r.size:
                _project_rows(params.relations, config.relation_norm, touched_r)

        if config.loss == "logistic" and config.l2 > 0.0:
            epoch_loss += config.l2 * params.norm_sq()

        val_metric = None
        if epoch % config.eval_every == 0 or epoch == config.max_epochs:
            val_metric = _validation_metric(spec, params, store, val_queries, eval_triples)
            if val_metric is not None:
                if best_metric is None or val_metric > best_metric:
                    best_metric = val_metric
                    best_params = params.copy()
                    best_epoch = epoch
                    evals_without_improvement = 0
                else:
                    evals_without_improvement += 1
        log.append(EpochRecord(epoch, epoch_loss, val_metric, time.perf_counter() - t0))
        if best_metric is not None and evals_without_improvement >= config.patience:
            break

    if best_metric is None:
        best_params = params
        best_epoch = len(log)
    return TrainResult(params=best_params, log=log, best_epoch=best_epoch, best_metric=best_metric)
