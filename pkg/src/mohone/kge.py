"""Base knowledge-graph embedding models: TransE, DistMult, ComplEx.

One translational-distance model and two semantic-matching models, enough to
exercise both families; anything else can be plugged in through the text
embedding file format. Scores are "higher is more plausible" for all three.
ComplEx stores real and imaginary halves side by side, so its matrices have
2*dim columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import TripleStore

MODELS = ("transe", "distmult", "complex")
_NORM_EPS = 1e-12


@dataclass
class KgeTrainConfig:
    dim: int = 100
    batch_size: int = 100
    epochs: int = 500
    margin: float = 1.0
    learning_rate: float = 0.01
    optimizer: str = "sgd"  # "sgd" | "adagrad"
    negatives_per_positive: int = 1
    lr_floor: float | None = None  # None = constant rate, else linear decay
    rng_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.margin <= 0:
            raise ValueError("margin must be > 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.optimizer not in ("sgd", "adagrad"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be >= 1")


@dataclass
class KGEmbedding:
    model: str
    Q: np.ndarray  # entities; 2*dim columns for complex
    W: np.ndarray  # relations
    loss_history: list = field(default_factory=list)

    @property
    def n_entities(self) -> int:
        return self.Q.shape[0]


def model_width(model: str, dim: int) -> int:
    return 2 * dim if model == "complex" else dim


def _complex_parts(x: np.ndarray):
    d = x.shape[-1] // 2
    return x[..., :d], x[..., d:]


def score_triples(model: str, Q: np.ndarray, W: np.ndarray,
                  h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorized plausibility scores for aligned id arrays."""
    if model == "transe":
        diff = Q[h] + W[r] - Q[t]
        return -np.linalg.norm(diff, axis=-1)
    if model == "distmult":
        return np.sum(Q[h] * W[r] * Q[t], axis=-1)
    if model == "complex":
        h_re, h_im = _complex_parts(Q[h])
        t_re, t_im = _complex_parts(Q[t])
        r_re, r_im = _complex_parts(W[r])
        return np.sum(r_re * (h_re * t_re + h_im * t_im)
                      + r_im * (h_re * t_im - h_im * t_re), axis=-1)
    raise ValueError(f"unknown model {model!r}")


def score(model: str, Q: np.ndarray, W: np.ndarray, h: int, r: int, t: int) -> float:
    return float(score_triples(model, Q, W, np.array([h]), np.array([r]), np.array([t]))[0])


def score_candidates(model: str, Q: np.ndarray, W: np.ndarray,
                     side: str, r: int, other: int) -> np.ndarray:
    """Scores of all entities substituted into one side of (h, r, t).

    side="tail" scores (other, r, c) for every candidate c; side="head"
    scores (c, r, other).
    """
    n = Q.shape[0]
    cand = np.arange(n)
    fixed = np.full(n, other)
    rel = np.full(n, r)
    if side == "tail":
        return score_triples(model, Q, W, fixed, rel, cand)
    if side == "head":
        return score_triples(model, Q, W, cand, rel, fixed)
    raise ValueError(f"side must be 'head' or 'tail', got {side!r}")


def make_scorer(emb: KGEmbedding):
    """Adapter giving the evaluation module's (side, r, other) -> scores shape."""
    def score_fn(side: str, r: int, other: int) -> np.ndarray:
        return score_candidates(emb.model, emb.Q, emb.W, side, r, other)
    return score_fn


def init_embeddings(model: str, n_entities: int, n_relations: int, dim: int,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    width = model_width(model, dim)
    bound = 6.0 / math.sqrt(dim)
    Q = rng.uniform(-bound, bound, size=(n_entities, width)) / math.sqrt(dim)
    W = rng.uniform(-bound, bound, size=(n_relations, width)) / math.sqrt(dim)
    if model == "transe":
        Q /= np.maximum(np.linalg.norm(Q, axis=1, keepdims=True), _NORM_EPS)
    return Q, W


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def batch_loss(model: str, Q: np.ndarray, W: np.ndarray,
               positives: np.ndarray, negatives: np.ndarray, margin: float = 1.0) -> float:
    """Training loss of a batch: aligned positives (B,3) and negatives (B*k,3).

    TransE uses the margin-ranking hinge over positive/negative pairs;
    DistMult and ComplEx use logistic loss (each positive once, each negative
    once).
    """
    k = negatives.shape[0] // positives.shape[0]
    if model == "transe":
        pos_rep = np.repeat(positives, k, axis=0)
        d_pos = -score_triples(model, Q, W, pos_rep[:, 0], pos_rep[:, 1], pos_rep[:, 2])
        d_neg = -score_triples(model, Q, W, negatives[:, 0], negatives[:, 1], negatives[:, 2])
        return float(np.sum(np.maximum(0.0, margin + d_pos - d_neg)))
    s_pos = score_triples(model, Q, W, positives[:, 0], positives[:, 1], positives[:, 2])
    s_neg = score_triples(model, Q, W, negatives[:, 0], negatives[:, 1], negatives[:, 2])
    return float(np.sum(_softplus(-s_pos)) + np.sum(_softplus(s_neg)))


def batch_gradients(model: str, Q: np.ndarray, W: np.ndarray,
                    positives: np.ndarray, negatives: np.ndarray, margin: float = 1.0):
    """Loss gradients as (entity_rows, entity_grads, relation_rows, relation_grads).

    Row ids may repeat; contributions for a repeated row must be summed before
    applying an optimizer step.
    """
    if model == "transe":
        return _transe_gradients(Q, W, positives, negatives, margin)
    return _logistic_gradients(model, Q, W, positives, negatives)


def _transe_gradients(Q, W, positives, negatives, margin):
    k = negatives.shape[0] // positives.shape[0]
    pos = np.repeat(positives, k, axis=0)
    neg = negatives
    diff_p = Q[pos[:, 0]] + W[pos[:, 1]] - Q[pos[:, 2]]
    diff_n = Q[neg[:, 0]] + W[neg[:, 1]] - Q[neg[:, 2]]
    d_p = np.linalg.norm(diff_p, axis=1)
    d_n = np.linalg.norm(diff_n, axis=1)
    active = (margin + d_p - d_n) > 0
    unit_p = np.where((d_p > _NORM_EPS)[:, None], diff_p / np.maximum(d_p, _NORM_EPS)[:, None], 0.0)
    unit_n = np.where((d_n > _NORM_EPS)[:, None], diff_n / np.maximum(d_n, _NORM_EPS)[:, None], 0.0)
    unit_p[~active] = 0.0
    unit_n[~active] = 0.0
    ent_rows = np.concatenate([pos[:, 0], pos[:, 2], neg[:, 0], neg[:, 2]])
    ent_grads = np.concatenate([unit_p, -unit_p, -unit_n, unit_n])
    rel_rows = np.concatenate([pos[:, 1], neg[:, 1]])
    rel_grads = np.concatenate([unit_p, -unit_n])
    return ent_rows, ent_grads, rel_rows, rel_grads


def _score_partials(model, Q, W, triples):
    """(ds/dh, ds/dr, ds/dt) row blocks for each triple."""
    h, r, t = triples[:, 0], triples[:, 1], triples[:, 2]
    if model == "distmult":
        return W[r] * Q[t], Q[h] * Q[t], Q[h] * W[r]
    h_re, h_im = _complex_parts(Q[h])
    t_re, t_im = _complex_parts(Q[t])
    r_re, r_im = _complex_parts(W[r])
    dh = np.concatenate([r_re * t_re + r_im * t_im, r_re * t_im - r_im * t_re], axis=1)
    dr = np.concatenate([h_re * t_re + h_im * t_im, h_re * t_im - h_im * t_re], axis=1)
    dt = np.concatenate([r_re * h_re - r_im * h_im, r_re * h_im + r_im * h_re], axis=1)
    return dh, dr, dt


def _logistic_gradients(model, Q, W, positives, negatives):
    s_pos = score_triples(model, Q, W, positives[:, 0], positives[:, 1], positives[:, 2])
    s_neg = score_triples(model, Q, W, negatives[:, 0], negatives[:, 1], negatives[:, 2])
    coef_pos = -_sigmoid(-s_pos)  # d softplus(-s) / ds
    coef_neg = _sigmoid(s_neg)    # d softplus(s) / ds
    dh_p, dr_p, dt_p = _score_partials(model, Q, W, positives)
    dh_n, dr_n, dt_n = _score_partials(model, Q, W, negatives)
    ent_rows = np.concatenate([positives[:, 0], positives[:, 2], negatives[:, 0], negatives[:, 2]])
    ent_grads = np.concatenate([coef_pos[:, None] * dh_p, coef_pos[:, None] * dt_p,
                                coef_neg[:, None] * dh_n, coef_neg[:, None] * dt_n])
    rel_rows = np.concatenate([positives[:, 1], negatives[:, 1]])
    rel_grads = np.concatenate([coef_pos[:, None] * dr_p, coef_neg[:, None] * dr_n])
    return ent_rows, ent_grads, rel_rows, rel_grads


def _aggregate(rows: np.ndarray, grads: np.ndarray):
    uniq, inv = np.unique(rows, return_inverse=True)
    agg = np.zeros((uniq.size, grads.shape[1]))
    np.add.at(agg, inv, grads)
    return uniq, agg


class _Optimizer:
    def __init__(self, kind: str):
        self.kind = kind
        self._accum: dict[int, np.ndarray] = {}

    def step(self, M: np.ndarray, rows: np.ndarray, grads: np.ndarray, lr: float):
        uniq, agg = _aggregate(rows, grads)
        if self.kind == "sgd":
            M[uniq] -= lr * agg
            return
        acc = self._accum.get(id(M))
        if acc is None:
            acc = np.zeros_like(M)
            self._accum[id(M)] = acc
        acc[uniq] += agg ** 2
        M[uniq] -= lr * agg / (np.sqrt(acc[uniq]) + 1e-10)


def corrupt_triples(positives: np.ndarray, n_entities: int, k: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Uniformly corrupt head or tail (coin flip) of each positive, k times.

    The replacement entity is redrawn until it differs from the one it
    replaces (possible whenever n_entities >= 2), so a positive never doubles
    as its own negative.
    """
    neg = np.repeat(positives, k, axis=0).copy()
    m = neg.shape[0]
    corrupt_head = rng.random(m) < 0.5
    repl = rng.integers(0, n_entities, size=m)
    if n_entities > 1:
        original = np.where(corrupt_head, neg[:, 0], neg[:, 2])
        clash = repl == original
        while np.any(clash):
            repl[clash] = rng.integers(0, n_entities, size=int(clash.sum()))
            clash = repl == original
    neg[corrupt_head, 0] = repl[corrupt_head]
    neg[~corrupt_head, 2] = repl[~corrupt_head]
    return neg


def _run_training(store: TripleStore, cfg: KgeTrainConfig, model: str,
                  Q: np.ndarray, W: np.ndarray, freeze_entities: bool) -> list[float]:
    triples = np.asarray(store.triples, dtype=np.int64)
    n_ent = store.n_entities
    rng = np.random.default_rng(cfg.rng_seed)
    opt = _Optimizer(cfg.optimizer)
    history: list[float] = []
    n = triples.shape[0]
    for epoch in range(cfg.epochs):
        if cfg.lr_floor is None or cfg.epochs <= 1:
            lr = cfg.learning_rate
        else:
            lr = max(cfg.lr_floor, cfg.learning_rate * (1.0 - epoch / cfg.epochs))
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = triples[perm[start:start + cfg.batch_size]]
            neg = corrupt_triples(batch, n_ent, cfg.negatives_per_positive, rng)
            epoch_loss += batch_loss(model, Q, W, batch, neg, cfg.margin)
            ent_rows, ent_grads, rel_rows, rel_grads = batch_gradients(
                model, Q, W, batch, neg, cfg.margin)
            if not freeze_entities:
                opt.step(Q, ent_rows, ent_grads, lr)
            opt.step(W, rel_rows, rel_grads, lr)
            if model == "transe" and not freeze_entities:
                touched = np.unique(ent_rows)
                norms = np.maximum(np.linalg.norm(Q[touched], axis=1, keepdims=True), _NORM_EPS)
                Q[touched] /= norms
        history.append(epoch_loss / n)
    return history


def train_kge(store: TripleStore, cfg: KgeTrainConfig, model: str = "transe") -> KGEmbedding:
    """Train a base model from scratch; deterministic for a fixed seed.

    With epochs=0 the (seeded) initialization is returned unchanged.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    if not store.triples:
        raise ValueError("triple store is empty")
    rng = np.random.default_rng(cfg.rng_seed)
    Q, W = init_embeddings(model, store.n_entities, store.n_relations, cfg.dim, rng)
    history = _run_training(store, cfg, model, Q, W, freeze_entities=False)
    return KGEmbedding(model=model, Q=Q, W=W, loss_history=history)


def relearn_relations(store: TripleStore, frozen_Q: np.ndarray, model: str,
                      cfg: KgeTrainConfig) -> KGEmbedding:
    """Re-train relation embeddings with the entity matrix held fixed.

    Entity rows are bitwise untouched: their gradients are dropped and TransE's
    row renormalization is skipped.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    if frozen_Q.shape[0] != store.n_entities:
        raise ValueError(f"frozen entity matrix has {frozen_Q.shape[0]} rows, "
                         f"store has {store.n_entities} entities")
    width = model_width(model, cfg.dim)
    if frozen_Q.shape[1] != width:
        raise ValueError(f"frozen entity matrix has width {frozen_Q.shape[1]}, "
                         f"model {model} at dim {cfg.dim} needs {width}")
    rng = np.random.default_rng(cfg.rng_seed)
    _, W = init_embeddings(model, store.n_entities, store.n_relations, cfg.dim, rng)
    Q = frozen_Q.copy()
    history = _run_training(store, cfg, model, Q, W, freeze_entities=True)
    return KGEmbedding(model=model, Q=Q, W=W, loss_history=history)
