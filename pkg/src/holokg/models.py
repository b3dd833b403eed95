"""Scoring functions and analytic gradients for the embedding model families.

Every family maps a triple (subject, predicate, object) of ids to a real
score eta; the probability of the triple is sigmoid(eta). Families:

    hole      eta = r_p . correlate(e_s, e_o)
    transe    eta = -dist(e_s + r_p, e_o)       (L1 or squared L2)
    rescal    eta = e_s^T R_p e_o               (full d x d relation matrix)
    distmult  eta = sum(r_p * e_s * e_o)        (diagonal bilinear; symmetric)
    ermlp     eta = w . tanh(W [e_s; r_p; e_o]) (shared projection + output)

Entities use one embedding per id regardless of slot. Gradients are exact
and are checked against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import IndexOutOfRange, ShapeMismatch
from .ops import Backend, ccorr, cconv, ccorr_rows, cconv_rows
from .rng import substream

FAMILIES = ("hole", "transe", "rescal", "distmult", "ermlp")


def sigmoid(x):
    """Logistic function, overflow-safe for large |x|."""
    return np.exp(-np.logaddexp(0.0, -np.asarray(x, dtype=np.float64)))


@dataclass(frozen=True)
class ModelSpec:
    """Model family plus its dimensionalities.

    `dim` is the entity embedding size d. Relation parameters are a vector
    of length d (hole/transe/distmult/ermlp) or a d x d matrix (rescal).
    `ermlp_hidden` is the hidden width of the ermlp projection.
    """

    family: str
    dim: int
    ermlp_hidden: int = 0
    transe_norm: str = "l2"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ShapeMismatch(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        if self.dim < 1:
            raise ShapeMismatch("dim must be >= 1")
        if self.family == "ermlp" and self.ermlp_hidden < 1:
            raise ShapeMismatch("ermlp requires ermlp_hidden >= 1")
        if self.transe_norm not in ("l1", "l2"):
            raise ShapeMismatch(f"transe_norm must be 'l1' or 'l2', got {self.transe_norm!r}")

    @property
    def relation_shape(self) -> tuple[int, ...]:
        if self.family == "rescal":
            return (self.dim, self.dim)
        return (self.dim,)


@dataclass
class EmbeddingSet:
    """All trainable parameters of one model.

    entities: (n_e, d). relations: (n_r,) + relation_shape. The ermlp
    family adds two shared blocks: proj (h, 3d) and out (h,).
    """

    entities: np.ndarray
    relations: np.ndarray
    proj: np.ndarray | None = None
    out: np.ndarray | None = None

    @property
    def n_entities(self) -> int:
        return self.entities.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relations.shape[0]

    def copy(self) -> "EmbeddingSet":
        return EmbeddingSet(
            entities=self.entities.copy(),
            relations=self.relations.copy(),
            proj=None if self.proj is None else self.proj.copy(),
            out=None if self.out is None else self.out.copy(),
        )

    def blocks(self) -> dict[str, np.ndarray]:
        out = {"entities": self.entities, "relations": self.relations}
        if self.proj is not None:
            out["proj"] = self.proj
        if self.out is not None:
            out["out"] = self.out
        return out

    def norm_sq(self) -> float:
        return float(sum(np.sum(b * b) for b in self.blocks().values()))


@dataclass
class ScoreGradient:
    """Exact partial derivatives of the score for one triple.

    wrt_relation matches the relation parameter shape. For ermlp the
    shared projection/output gradients are carried too, since the
    trainer updates them alongside the embeddings.
    """

    wrt_subject: np.ndarray
    wrt_object: np.ndarray
    wrt_relation: np.ndarray
    wrt_shared: dict[str, np.ndarray] = field(default_factory=dict)


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_params(spec: ModelSpec, n_entities: int, n_relations: int, seed: int = 0) -> EmbeddingSet:
    """Bounded uniform init; entity rows renormalized to unit L2."""
    if n_entities < 1 or n_relations < 1:
        raise ShapeMismatch("need at least one entity and one relation")
    rng = substream(seed, "init")
    d = spec.dim
    entities = _glorot(rng, (n_entities, d), d, d)
    entities /= np.linalg.norm(entities, axis=1, keepdims=True)
    if spec.family == "rescal":
        relations = _glorot(rng, (n_relations, d, d), d, d)
    else:
        relations = _glorot(rng, (n_relations, d), d, d)
    proj = out = None
    if spec.family == "ermlp":
        h = spec.ermlp_hidden
        proj = _glorot(rng, (h, 3 * d), 3 * d, h)
        out = _glorot(rng, (h,), h, 1)
    return EmbeddingSet(entities=entities, relations=relations, proj=proj, out=out)


def check_params(spec: ModelSpec, params: EmbeddingSet) -> None:
    """Raise ShapeMismatch when blocks disagree with the spec."""
    if params.entities.ndim != 2 or params.entities.shape[1] != spec.dim:
        raise ShapeMismatch(f"entities shape {params.entities.shape} does not match dim {spec.dim}")
    want = (params.relations.shape[0],) + spec.relation_shape
    if params.relations.shape != want:
        raise ShapeMismatch(f"relations shape {params.relations.shape}, expected {want}")
    if spec.family == "ermlp":
        if params.proj is None or params.out is None:
            raise ShapeMismatch("ermlp requires proj and out blocks")
        if params.proj.shape != (spec.ermlp_hidden, 3 * spec.dim):
            raise ShapeMismatch(f"proj shape {params.proj.shape}, expected {(spec.ermlp_hidden, 3 * spec.dim)}")
        if params.out.shape != (spec.ermlp_hidden,):
            raise ShapeMismatch(f"out shape {params.out.shape}, expected {(spec.ermlp_hidden,)}")


def _check_triple(params: EmbeddingSet, triple) -> tuple[int, int, int]:
    s, p, o = (int(x) for x in triple)
    if not (0 <= s < params.n_entities and 0 <= o < params.n_entities):
        raise IndexOutOfRange(f"entity id out of range in triple {(s, p, o)}")
    if not (0 <= p < params.n_relations):
        raise IndexOutOfRange(f"relation id {p} out of range")
    return s, p, o


def score(spec: ModelSpec, params: EmbeddingSet, triple, backend: Backend = Backend.FFT) -> float:
    """Score eta for one triple; probability of the triple is sigmoid(eta)."""
    check_params(spec, params)
    s, p, o = _check_triple(params, triple)
    e_s, e_o = params.entities[s], params.entities[o]
    if spec.family == "hole":
        return float(params.relations[p] @ ccorr(e_s, e_o, backend))
    if spec.family == "transe":
        v = e_s + params.relations[p] - e_o
        return -float(v @ v) if spec.transe_norm == "l2" else -float(np.abs(v).sum())
    if spec.family == "rescal":
        return float(e_s @ params.relations[p] @ e_o)
    if spec.family == "distmult":
        return float(np.sum(params.relations[p] * e_s * e_o))
    # ermlp
    x = np.concatenate([e_s, params.relations[p], e_o])
    return float(params.out @ np.tanh(params.proj @ x))


def probability(spec: ModelSpec, params: EmbeddingSet, triple, backend: Backend = Backend.FFT) -> float:
    return float(sigmoid(score(spec, params, triple, backend)))


def score_gradients(spec: ModelSpec, params: EmbeddingSet, triple, backend: Backend = Backend.FFT) -> ScoreGradient:
    """Exact gradient of score() for one triple, per parameter block."""
    check_params(spec, params)
    s, p, o = _check_triple(params, triple)
    e_s, e_o = params.entities[s], params.entities[o]
    if spec.family == "hole":
        r = params.relations[p]
        return ScoreGradient(
            wrt_subject=ccorr(r, e_o, backend),
            wrt_object=cconv(r, e_s, backend),
            wrt_relation=ccorr(e_s, e_o, backend),
        )
    if spec.family == "transe":
        v = e_s + params.relations[p] - e_o
        g = 2.0 * v if spec.transe_norm == "l2" else np.sign(v)
        return ScoreGradient(wrt_subject=-g, wrt_object=g.copy(), wrt_relation=-g)
    if spec.family == "rescal":
        R = params.relations[p]
        return ScoreGradient(
            wrt_subject=R @ e_o,
            wrt_object=R.T @ e_s,
            wrt_relation=np.outer(e_s, e_o),
        )
    if spec.family == "distmult":
        r = params.relations[p]
        return ScoreGradient(wrt_subject=r * e_o, wrt_object=r * e_s, wrt_relation=e_s * e_o)
    # ermlp
    r = params.relations[p]
    x = np.concatenate([e_s, r, e_o])
    hvec = np.tanh(params.proj @ x)
    dz = params.out * (1.0 - hvec * hvec)
    dx = params.proj.T @ dz
    d = spec.dim
    return ScoreGradient(
        wrt_subject=dx[:d],
        wrt_relation=dx[d : 2 * d],
        wrt_object=dx[2 * d :],
        wrt_shared={"proj": np.outer(dz, x), "out": hvec},
    )


def parameter_count(spec: ModelSpec, n_entities: int, n_relations: int) -> int:
    """Parameter total under the per-family memory-complexity formula.

    hole/transe/distmult: n_e*d + n_r*d; rescal: n_e*d + n_r*d^2;
    ermlp: n_e*d + n_r*d + h*d (the shared-projection term is counted
    as h*d by convention; the concrete MLP stores 3*h*d + h weights).
    """
    if n_entities < 1 or n_relations < 1:
        raise ShapeMismatch("counts must be positive")
    d = spec.dim
    if spec.family == "rescal":
        return n_entities * d + n_relations * d * d
    if spec.family == "ermlp":
        return n_entities * d + n_relations * d + spec.ermlp_hidden * d
    return n_entities * d + n_relations * d


# ---------------------------------------------------------------------------
# Vectorized kernels used by the trainer and the ranking evaluator. These
# skip per-call validation; callers pass index arrays already in range.
# ---------------------------------------------------------------------------


def score_batch(spec: ModelSpec, params: EmbeddingSet, S: np.ndarray, P: np.ndarray, O: np.ndarray) -> np.ndarray:
    """Scores for index arrays S, P, O of equal length."""
    E_s = params.entities[S]
    E_o = params.entities[O]
    R = params.relations[P]
    if spec.family == "hole":
        return np.einsum("bd,bd->b", R, ccorr_rows(E_s, E_o))
    if spec.family == "transe":
        V = E_s + R - E_o
        if spec.transe_norm == "l2":
            return -np.einsum("bd,bd->b", V, V)
        return -np.abs(V).sum(axis=1)
    if spec.family == "rescal":
        return np.einsum("bi,bij,bj->b", E_s, R, E_o)
    if spec.family == "distmult":
        return np.einsum("bd,bd,bd->b", R, E_s, E_o)
    X = np.concatenate([E_s, R, E_o], axis=1)
    return np.tanh(X @ params.proj.T) @ params.out


@dataclass
class GradientBatch:
    """Weighted score gradients for a batch, in scatterable form.

    entity_index/entity_grads hold one row per (triple, slot) pair;
    relation rows are one per triple. Shared blocks (ermlp) are dense.
    Rows for repeated indices are summed by the optimizer.
    """

    entity_index: np.ndarray
    entity_grads: np.ndarray
    relation_index: np.ndarray
    relation_grads: np.ndarray
    shared: dict[str, np.ndarray] = field(default_factory=dict)


def gradient_batch(
    spec: ModelSpec,
    params: EmbeddingSet,
    S: np.ndarray,
    P: np.ndarray,
    O: np.ndarray,
    coeff: np.ndarray,
) -> GradientBatch:
    """Batch of coeff[i] * d(score_i)/d(theta), ready for a sparse update."""
    E_s = params.entities[S]
    E_o = params.entities[O]
    R = params.relations[P]
    c = coeff[:, None]
    if spec.family == "hole":
        g_s = ccorr_rows(R, E_o) * c
        g_o = cconv_rows(R, E_s) * c
        g_r = ccorr_rows(E_s, E_o) * c
    elif spec.family == "transe":
        V = E_s + R - E_o
        G = 2.0 * V if spec.transe_norm == "l2" else np.sign(V)
        g_s = -G * c
        g_o = G * c
        g_r = -G * c
    elif spec.family == "rescal":
        g_s = np.einsum("bij,bj->bi", R, E_o) * c
        g_o = np.einsum("bij,bi->bj", R, E_s) * c
        g_r = np.einsum("bi,bj->bij", E_s, E_o) * coeff[:, None, None]
    elif spec.family == "distmult":
        g_s = R * E_o * c
        g_o = R * E_s * c
        g_r = E_s * E_o * c
    else:  # ermlp
        d = spec.dim
        X = np.concatenate([E_s, R, E_o], axis=1)
        H = np.tanh(X @ params.proj.T)
        dZ = (coeff[:, None] * params.out[None, :]) * (1.0 - H * H)
        dX = dZ @ params.proj
        g_s = dX[:, :d]
        g_r = dX[:, d : 2 * d]
        g_o = dX[:, 2 * d :]
        shared = {"proj": dZ.T @ X, "out": coeff @ H}
        return GradientBatch(
            entity_index=np.concatenate([S, O]),
            entity_grads=np.concatenate([g_s, g_o], axis=0),
            relation_index=P,
            relation_grads=g_r,
            shared=shared,
        )
    return GradientBatch(
        entity_index=np.concatenate([S, O]),
        entity_grads=np.concatenate([g_s, g_o], axis=0),
        relation_index=P,
        relation_grads=g_r,
    )


def score_all_candidates(
    spec: ModelSpec,
    params: EmbeddingSet,
    predicate: int,
    fixed_entity: int,
    slot: str,
) -> np.ndarray:
    """Scores of all n_e substitutions of one slot of a triple.

    slot="subject" scores (e', p, fixed); slot="object" scores
    (fixed, p, e'). For hole this needs a single circular operation on
    the fixed pair plus one matrix-vector product: substituting the
    subject, eta(e') = e' . correlate(r_p, e_fixed); substituting the
    object, eta(e') = e' . convolve(r_p, e_fixed).
    """
    if slot not in ("subject", "object"):
        raise ValueError(f"slot must be 'subject' or 'object', got {slot!r}")
    if not (0 <= fixed_entity < params.n_entities):
        raise IndexOutOfRange(f"entity id {fixed_entity} out of range")
    if not (0 <= predicate < params.n_relations):
        raise IndexOutOfRange(f"relation id {predicate} out of range")
    E = params.entities
    e_fix = E[fixed_entity]
    R = params.relations[predicate]
    if spec.family == "hole":
        v = ccorr(R, e_fix) if slot == "subject" else cconv(R, e_fix)
        return E @ v
    if spec.family == "transe":
        V = (E + R) - e_fix if slot == "subject" else (e_fix + R) - E
        if spec.transe_norm == "l2":
            return -np.einsum("nd,nd->n", V, V)
        return -np.abs(V).sum(axis=1)
    if spec.family == "rescal":
        v = R @ e_fix if slot == "subject" else R.T @ e_fix
        return E @ v
    if spec.family == "distmult":
        return E @ (R * e_fix)
    # ermlp: proj splits into per-slot blocks [W_s | W_p | W_o]
    d = spec.dim
    W_s, W_p, W_o = params.proj[:, :d], params.proj[:, d : 2 * d], params.proj[:, 2 * d :]
    if slot == "subject":
        base = W_p @ R + W_o @ e_fix
        return np.tanh(E @ W_s.T + base) @ params.out
    base = W_s @ e_fix + W_p @ R
    return np.tanh(E @ W_o.T + base) @ params.out
