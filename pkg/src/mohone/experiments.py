"""Seeded end-to-end trials: does network infusion improve link prediction?

Each trial builds a synthetic community KG, trains a TransE baseline, learns
shared-neighborhood network embeddings from the projected train graph,
retrofits the entity matrix toward its network neighbors, relearns relations
with entities frozen, and evaluates baseline vs infused under the filtered
protocol. Everything is deterministic in the trial seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffusion, kge, netembed
from .evaluation import EvalResult, evaluate, paired_significance
from .graph import TripleStore, Vocab, normalized_laplacian, project_graph
from .retrofit import RetrofitProblem, build_neighbor_sets, retrofit
from .synth import make_community_kg


@dataclass
class TrialResult:
    seed: int
    baseline: EvalResult
    infused: EvalResult

    @property
    def improved(self) -> bool:
        return self.infused.mrr >= self.baseline.mrr


def community_improvement_trial(seed: int, scale: float = 2.0, dim: int = 64,
                                netembed_epochs: int = 30, pairs_per_node: int = 30,
                                kge_epochs: int = 80, neighbors: int = 10,
                                alpha: float = 1.0) -> TrialResult:
    kg = make_community_kg(seed=seed)
    ev, rv = Vocab(), Vocab()
    train_ids = [(ev.add(h), rv.add(r), ev.add(t)) for h, r, t in kg.train]
    store = TripleStore(train_ids, ev, rv)
    n_entities = len(ev)

    def to_ids(rows):
        return [(ev.get(h), rv.get(r), ev.get(t)) for h, r, t in rows]

    test_ids = to_ids(kg.test)
    filter_ids = [t for t in train_ids + to_ids(kg.valid) + test_ids if min(t) >= 0]

    graph = project_graph(store)
    psi = diffusion.heat_matrix_exact(normalized_laplacian(graph), scale)
    sampler = netembed.build_shnb_sampler(psi)
    net_cfg = netembed.TrainConfig(dim=dim, epochs=netembed_epochs,
                                   pairs_per_node_per_epoch=pairs_per_node, rng_seed=seed)
    F = netembed.train_embeddings(sampler, net_cfg)

    kge_cfg = kge.KgeTrainConfig(dim=dim, batch_size=100, epochs=kge_epochs,
                                 learning_rate=0.1, margin=1.0, lr_floor=0.01,
                                 rng_seed=seed)
    base = kge.train_kge(store, kge_cfg, model="transe")

    problem = RetrofitProblem(Q_hat=base.Q,
                              neighbor_sets=build_neighbor_sets(F, neighbors),
                              alpha=np.full(n_entities, alpha))
    infused_q = retrofit(problem).Q
    infused = kge.relearn_relations(store, infused_q, "transe", kge_cfg)

    r_base = evaluate(kge.make_scorer(base), test_ids, filter_ids, n_entities)
    r_inf = evaluate(kge.make_scorer(infused), test_ids, filter_ids, n_entities)
    return TrialResult(seed=seed, baseline=r_base, infused=r_inf)


def improvement_experiment(n_seeds: int = 10, alpha_level: float = 0.05, **trial_kw) -> dict:
    """Run seeded trials and pool per-query reciprocal ranks for significance."""
    trials = [community_improvement_trial(seed, **trial_kw) for seed in range(n_seeds)]
    pooled_inf = np.concatenate([t.infused.per_query_reciprocal_ranks for t in trials])
    pooled_base = np.concatenate([t.baseline.per_query_reciprocal_ranks for t in trials])
    p_value, significant = paired_significance(pooled_inf, pooled_base, alpha=alpha_level)
    return {
        "trials": trials,
        "wins": sum(t.improved for t in trials),
        "n_seeds": n_seeds,
        "p_value": p_value,
        "significant": significant,
        "mean_delta": float(np.mean([t.infused.mrr - t.baseline.mrr for t in trials])),
    }
