"""Filtered link-prediction evaluation: MRR, Hits@k, paired significance.

Every test triple spawns two ranking queries (corrupt the head, corrupt the
tail). Candidates forming some other known-true triple are removed before
ranking; the truth itself is never filtered out. Tied scores get the average
rank, rounded half-up, so a constant scorer earns the middle rank instead of
rank 1.

Scorers are plain callables (side, relation, fixed_entity) -> score vector
over all entities, so anything that can score candidates can be evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_HITS = (1, 3, 10)
DEFAULT_RESAMPLES = 10000


@dataclass
class EvalResult:
    mrr: float
    hits_at_k: dict
    per_query_reciprocal_ranks: np.ndarray
    per_query_ranks: np.ndarray
    skipped: int
    n_queries: int


def _tie_rank(scores: np.ndarray, truth: int, excluded) -> int:
    """Average-tie rank of the truth among non-excluded candidates."""
    s_true = scores[truth]
    keep = np.ones(scores.size, dtype=bool)
    if excluded is not None and len(excluded):
        keep[np.asarray(excluded, dtype=np.int64)] = False
    keep[truth] = False
    kept = scores[keep]
    greater = int(np.count_nonzero(kept > s_true))
    ties = int(np.count_nonzero(kept == s_true))
    return 1 + greater + (ties + 1) // 2


def rank_filtered(score_fn, query, truth: int, known_true) -> int:
    """Filtered rank for a query (h, r, None) or (None, r, t).

    known_true is a set of (h, r, t) triples; any candidate completing one of
    them (other than the truth) is removed before ranking.
    """
    h, r, t = query
    if (h is None) == (t is None):
        raise ValueError("query must fix exactly one of head or tail")
    if t is None:
        scores = score_fn("tail", r, h)
        excluded = [c for c in range(scores.size) if c != truth and (h, r, c) in known_true]
    else:
        scores = score_fn("head", r, t)
        excluded = [c for c in range(scores.size) if c != truth and (c, r, t) in known_true]
    return _tie_rank(np.asarray(scores, dtype=np.float64), truth, excluded)


def _filter_index(filter_triples):
    tails: dict = {}
    heads: dict = {}
    for h, r, t in filter_triples:
        tails.setdefault((h, r), set()).add(t)
        heads.setdefault((t, r), set()).add(h)
    return heads, tails


def evaluate(score_fn, test_triples, filter_triples, n_entities: int,
             hits_ks=DEFAULT_HITS) -> EvalResult:
    """Rank both queries of every test triple and aggregate MRR / Hits@k.

    Triples containing an out-of-vocabulary id (negative or >= n_entities)
    are skipped; both of their queries count toward the skip statistic.
    Reciprocal ranks are stored per query, head query then tail query, in
    test order, and the final reductions run in that fixed order.
    """
    test_triples = list(test_triples)
    if not test_triples:
        raise ValueError("test set is empty")
    heads, tails = _filter_index(filter_triples)
    ranks: list[int] = []
    skipped = 0
    for h, r, t in test_triples:
        if min(h, r, t) < 0 or h >= n_entities or t >= n_entities:
            skipped += 2
            continue
        scores = np.asarray(score_fn("head", r, t), dtype=np.float64)
        excl = heads.get((t, r), ()) - {h} if (t, r) in heads else ()
        ranks.append(_tie_rank(scores, h, list(excl)))
        scores = np.asarray(score_fn("tail", r, h), dtype=np.float64)
        excl = tails.get((h, r), ()) - {t} if (h, r) in tails else ()
        ranks.append(_tie_rank(scores, t, list(excl)))
    if not ranks:
        raise ValueError("all test queries were skipped; vocabulary mismatch?")
    rank_arr = np.asarray(ranks, dtype=np.int64)
    rr = 1.0 / rank_arr
    hits = {int(k): float(np.mean(rank_arr <= k)) for k in hits_ks}
    return EvalResult(
        mrr=float(np.mean(rr)),
        hits_at_k=hits,
        per_query_reciprocal_ranks=rr,
        per_query_ranks=rank_arr,
        skipped=skipped,
        n_queries=rank_arr.size,
    )


def paired_significance(rr_a, rr_b, resamples: int = DEFAULT_RESAMPLES,
                        alpha: float = 0.05, rng_seed: int = 0) -> tuple[float, bool]:
    """Two-sided paired randomization test on per-query reciprocal ranks.

    Signs of the aligned differences are flipped at random (all 2^n patterns
    enumerated exactly when that is no more work than `resamples` draws); the
    p-value is the fraction of sign patterns whose absolute mean difference
    reaches the observed one, with the usual add-one correction in the Monte
    Carlo case.
    """
    a = np.asarray(rr_a, dtype=np.float64)
    b = np.asarray(rr_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"reciprocal-rank vectors differ in length: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty reciprocal-rank vectors")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    d = a - b
    observed = abs(float(np.mean(d)))
    n = d.size
    # patterns reaching the observed statistic up to float noise count as ties
    threshold = observed - 1e-12 * (1.0 + observed)
    if n <= 20 and 2 ** n <= resamples:
        patterns = np.arange(2 ** n, dtype=np.uint64)
        signs = np.where((patterns[:, None] >> np.arange(n, dtype=np.uint64)) & 1, -1.0, 1.0)
        means = np.abs(signs @ d) / n
        p = float(np.mean(means >= threshold))
    else:
        rng = np.random.default_rng(rng_seed)
        hits = 0
        done = 0
        while done < resamples:
            block = min(512, resamples - done)
            signs = rng.integers(0, 2, size=(block, n)) * 2 - 1
            means = np.abs(signs @ d) / n
            hits += int(np.count_nonzero(means >= threshold))
            done += block
        p = (1.0 + hits) / (resamples + 1.0)
    return p, bool(p < alpha)
