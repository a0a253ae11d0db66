"""Network embeddings trained by skipgram with negative sampling.

Node pairs (u, v) are drawn from per-node weight tables and pushed together in
embedding space while uniform negatives are pushed away. Two interchangeable
samplers define similarity:

* shared-neighborhood ("shnb"): v is drawn from u's heat column, with u's
  self-mass excluded and the rest renormalized;
* structural: weights decrease with the Jensen-Shannon divergence between heat
  signatures, z-scored per node and squashed through a softmax, truncated to
  the closest few nodes.

Sampling uses alias tables, so a draw is O(1) regardless of table size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import HeatDiffusionMatrix, HeatSignature

DEFAULT_NEIGHBOR_CAP = 10


@dataclass
class TrainConfig:
    dim: int = 100
    epochs: int = 10
    pairs_per_node_per_epoch: int = 20
    negatives: int = 5
    learning_rate: float = 0.025
    lr_floor: float = 1e-4
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("dim", "epochs", "pairs_per_node_per_epoch", "negatives"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class NodeEmbeddingMatrix:
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def build_alias_table(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table for a probability vector: O(K) build, O(1) draws."""
    k = probs.size
    prob = np.zeros(k)
    alias = np.zeros(k, dtype=np.int64)
    scaled = probs * k
    small = [i for i in range(k) if scaled[i] < 1.0]
    large = [i for i in range(k) if scaled[i] >= 1.0]
    scaled = scaled.copy()
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] -= 1.0 - scaled[s]
        (small if scaled[g] < 1.0 else large).append(g)
    for i in large:
        prob[i] = 1.0
    for i in small:  # numerical leftovers
        prob[i] = 1.0
    return prob, alias


class PairSampler:
    """Per-node positive-pair distributions with O(1) alias sampling.

    Nodes without any admissible partner (e.g. a pure self-mass heat column)
    are marked unsampleable and skipped by training.
    """

    def __init__(self, mode: str, n: int, candidates, probs, neighbor_cap: int | None = None):
        self.mode = mode
        self.n = n
        self.candidates = candidates
        self.probs = probs
        self.neighbor_cap = neighbor_cap
        self._alias = [build_alias_table(p) if p is not None else None for p in probs]

    def is_sampleable(self, u: int) -> bool:
        return self.probs[u] is not None

    def sampleable_nodes(self) -> np.ndarray:
        return np.array([u for u in range(self.n) if self.is_sampleable(u)], dtype=np.int64)

    def weight_vector(self, u: int) -> np.ndarray:
        w = np.zeros(self.n)
        if self.probs[u] is not None:
            w[self.candidates[u]] = self.probs[u]
        return w

    def sample(self, u: int, rng: np.random.Generator) -> int:
        prob, alias = self._alias[u]
        i = int(rng.integers(prob.size))
        if rng.random() >= prob[i]:
            i = int(alias[i])
        return int(self.candidates[u][i])

    def sample_many(self, u: int, rng: np.random.Generator, size: int) -> np.ndarray:
        prob, alias = self._alias[u]
        idx = rng.integers(prob.size, size=size)
        coin = rng.random(size)
        idx = np.where(coin < prob[idx], idx, alias[idx])
        return self.candidates[u][idx]


def build_shnb_sampler(psi: HeatDiffusionMatrix) -> PairSampler:
    """Shared-neighborhood sampler: Pr(v|u) proportional to u's heat column.

    The self entry is zeroed and the remaining mass renormalized; a column that
    is a pure point mass on its own node becomes unsampleable.
    """
    n = psi.n
    candidates: list[np.ndarray | None] = []
    probs: list[np.ndarray | None] = []
    for u in range(n):
        w = psi.psi[:, u].copy()
        w[u] = 0.0
        total = w.sum()
        if total <= 0.0:
            candidates.append(None)
            probs.append(None)
            continue
        idx = np.flatnonzero(w)
        candidates.append(idx)
        probs.append(w[idx] / total)
    return PairSampler("shnb", n, candidates, probs)


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence in nats, with the 0*log(0) = 0 convention."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"histogram length mismatch: {p.shape} vs {q.shape}")
    if abs(p.sum() - 1.0) > 1e-6 or abs(q.sum() - 1.0) > 1e-6:
        raise ValueError("histograms must each sum to 1")
    m = 0.5 * (p + q)
    kl_pm = np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0) / np.where(m > 0, m, 1.0)), 0.0))
    kl_qm = np.sum(np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0) / np.where(m > 0, m, 1.0)), 0.0))
    return max(0.0, float(0.5 * kl_pm + 0.5 * kl_qm))


def _js_to_rows(p: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """JS divergence between p and every row of `rows`, vectorized."""
    m = 0.5 * (p[None, :] + rows)
    safe_m = np.where(m > 0, m, 1.0)
    kl_pm = np.sum(np.where(p[None, :] > 0, p[None, :] * np.log(np.where(p > 0, p, 1.0)[None, :] / safe_m), 0.0), axis=1)
    kl_qm = np.sum(np.where(rows > 0, rows * np.log(np.where(rows > 0, rows, 1.0) / safe_m), 0.0), axis=1)
    return np.maximum(0.0, 0.5 * kl_pm + 0.5 * kl_qm)


def build_structural_sampler(signatures: list[HeatSignature],
                             cap: int = DEFAULT_NEIGHBOR_CAP) -> PairSampler:
    """Structural-role sampler from heat signatures.

    For each node the divergences to all others are z-scored and mapped through
    softmax(-z), so smaller divergence means larger weight; only the `cap`
    closest nodes keep mass. Identical divergences everywhere (zero variance)
    fall back to uniform weights over the retained candidates.
    """
    n = len(signatures)
    if n < 2:
        raise ValueError("need at least 2 nodes to build a structural sampler")
    for i, sig in enumerate(signatures):
        if sig.node != i:
            raise ValueError("signatures must be ordered by node id")
    hist = np.vstack([sig.histogram for sig in signatures])
    m_eff = min(cap, n - 1)
    candidates: list[np.ndarray | None] = []
    probs: list[np.ndarray | None] = []
    for u in range(n):
        others = np.concatenate([np.arange(u), np.arange(u + 1, n)])
        div = _js_to_rows(hist[u], hist[others])
        order = np.argsort(div, kind="stable")[:m_eff]
        chosen = others[order]
        std = div.std()
        if std == 0.0:
            w = np.full(m_eff, 1.0 / m_eff)
        else:
            z = (div[order] - div.mean()) / std
            z = -z - np.max(-z)
            w = np.exp(z)
            w /= w.sum()
        candidates.append(chosen)
        probs.append(w)
    return PairSampler("structural", n, candidates, probs, neighbor_cap=cap)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def _log_sigmoid(x: float) -> float:
    return -float(np.logaddexp(0.0, -x))


def sgns_loss(F: np.ndarray, u: int, v: int, negatives) -> float:
    """Negated skipgram objective for one (u, v) pair and its negatives."""
    fu = F[u]
    loss = -_log_sigmoid(float(fu @ F[v]))
    for w in negatives:
        loss -= _log_sigmoid(-float(fu @ F[w]))
    return loss


def sgns_gradients(F: np.ndarray, u: int, v: int, negatives) -> dict[int, np.ndarray]:
    """Loss gradients per touched row, accumulated over duplicate row ids."""
    grads: dict[int, np.ndarray] = {}

    def acc(row, g):
        if row in grads:
            grads[row] += g
        else:
            grads[row] = g.copy()

    fu = F[u].copy()
    s_pos = _sigmoid(float(fu @ F[v]))
    acc(u, -(1.0 - s_pos) * F[v])
    acc(v, -(1.0 - s_pos) * fu)
    for w in negatives:
        s_neg = _sigmoid(float(fu @ F[w]))
        acc(u, s_neg * F[w])
        acc(w, s_neg * fu)
    return grads


def sgns_step(F: np.ndarray, u: int, v: int, negatives, lr: float) -> float:
    """One in-place stochastic update; returns the pre-update loss."""
    loss = sgns_loss(F, u, v, negatives)
    for row, g in sgns_gradients(F, u, v, negatives).items():
        F[row] -= lr * g
    return loss


def train_embeddings(sampler: PairSampler, cfg: TrainConfig, workers: int = 1) -> NodeEmbeddingMatrix:
    """Train node embeddings against a pair sampler.

    Single-threaded runs are bitwise deterministic for a given seed. With
    workers > 1, epochs are split across threads whose unsynchronized updates
    may race benignly; that mode is not deterministic.
    """
    nodes = sampler.sampleable_nodes()
    if nodes.size == 0:
        raise ValueError("sampler has no sampleable nodes")
    rng = np.random.default_rng(cfg.rng_seed)
    n = sampler.n
    F = (rng.random((n, cfg.dim)) - 0.5) / cfg.dim
    total_steps = cfg.epochs * cfg.pairs_per_node_per_epoch * nodes.size
    if workers > 1:
        _train_parallel(F, sampler, cfg, nodes, workers)
        return NodeEmbeddingMatrix(matrix=F)
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(nodes.size)
        for i in order:
            u = int(nodes[i])
            for _ in range(cfg.pairs_per_node_per_epoch):
                lr = max(cfg.lr_floor, cfg.learning_rate * (1.0 - step / total_steps))
                v = sampler.sample(u, rng)
                negs = rng.integers(0, n, size=cfg.negatives)
                sgns_step(F, u, v, negs, lr)
                step += 1
    return NodeEmbeddingMatrix(matrix=F)


def _train_parallel(F: np.ndarray, sampler: PairSampler, cfg: TrainConfig,
                    nodes: np.ndarray, workers: int) -> None:
    from concurrent.futures import ThreadPoolExecutor

    shards = np.array_split(nodes, workers)
    total_steps = cfg.epochs * cfg.pairs_per_node_per_epoch * nodes.size

    def run(worker_id: int, shard: np.ndarray) -> None:
        rng = np.random.default_rng([cfg.rng_seed, worker_id])
        step = 0
        for _ in range(cfg.epochs):
            for i in rng.permutation(shard.size):
                u = int(shard[i])
                for _ in range(cfg.pairs_per_node_per_epoch):
                    frac = min(1.0, step * workers / total_steps)
                    lr = max(cfg.lr_floor, cfg.learning_rate * (1.0 - frac))
                    v = sampler.sample(u, rng)
                    negs = rng.integers(0, sampler.n, size=cfg.negatives)
                    sgns_step(F, u, v, negs, lr)
                    step += 1

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(run, range(workers), shards))
