import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mohone.evaluation import evaluate, paired_significance, rank_filtered


def const_scorer(values):
    arr = np.asarray(values, dtype=np.float64)

    def score_fn(side, r, other):
        return arr
    return score_fn


class TestRankFiltered:
    def test_truth_strictly_highest(self):
        fn = const_scorer([0.1, 0.9, 0.3])
        assert rank_filtered(fn, (0, 0, None), 1, set()) == 1

    def test_all_tied_average_rank(self):
        fn = const_scorer([3.0] * 5)
        assert rank_filtered(fn, (0, 0, None), 2, set()) == 3

    def test_filtering_known_true(self):
        # candidates 0..3; candidate 3 is known-true and filtered; truth=1
        # scores put 3 and 0 above the truth, but 3 is removed
        fn = const_scorer([0.8, 0.5, 0.1, 0.9])
        known = {(0, 0, 3)}
        assert rank_filtered(fn, (0, 0, None), 1, known) == 2

    def test_truth_itself_never_filtered(self):
        fn = const_scorer([0.9, 0.5, 0.1])
        known = {(0, 0, 1)}  # the query's own truth
        assert rank_filtered(fn, (0, 0, None), 1, known) == 2

    def test_head_query_side(self):
        fn = const_scorer([0.1, 0.9, 0.3])
        assert rank_filtered(fn, (None, 0, 2), 1, set()) == 1

    def test_rejects_double_open_query(self):
        with pytest.raises(ValueError):
            rank_filtered(const_scorer([1.0]), (None, 0, None), 0, set())

    @given(st.integers(min_value=3, max_value=30), st.integers(min_value=0, max_value=2 ** 31))
    @settings(max_examples=40, deadline=None)
    def test_filtered_rank_never_exceeds_raw(self, n, seed):
        rng = np.random.default_rng(seed)
        scores = rng.random(n)
        truth = int(rng.integers(n))
        known = {(0, 0, int(c)) for c in rng.integers(0, n, size=n // 2)}
        fn = const_scorer(scores)
        raw = rank_filtered(fn, (0, 0, None), truth, set())
        filt = rank_filtered(fn, (0, 0, None), truth, known)
        assert filt <= raw


class TestEvaluate:
    def test_rank_arithmetic(self):
        # scorer ranks candidate (n - id) descending: entity 0 scores highest
        n = 4
        triples = [(0, 0, 1), (1, 0, 2), (3, 0, 0)]

        def score_fn(side, r, other):
            return -np.arange(n, dtype=float)

        res = evaluate(score_fn, triples, [], n)
        assert res.n_queries == 6
        # ranks equal truth id + 1 for every query
        expected_ranks = [1, 2, 2, 3, 4, 1]
        assert res.per_query_ranks.tolist() == expected_ranks
        assert res.mrr == pytest.approx(np.mean(1.0 / np.array(expected_ranks)), abs=1e-12)

    def test_example_mrr_and_hits(self):
        # mirror of the stated example: ranks [1, 2, 4] give these aggregates
        ranks = np.array([1, 2, 4])
        assert np.mean(1.0 / ranks) == pytest.approx(0.583333, abs=1e-6)
        assert np.mean(ranks <= 10) == 1.0

    def test_perfect_model_on_bijective_toy(self):
        triples = [(i, 0, (i + 1) % 5) for i in range(5)]
        target = {(h, r): t for h, r, t in triples}
        source = {(t, r): h for h, r, t in triples}

        def score_fn(side, r, other):
            s = np.zeros(5)
            key = (other, r)
            s[target[key] if side == "tail" else source[key]] = 1.0
            return s

        res = evaluate(score_fn, triples, triples, 5)
        assert res.mrr == 1.0
        assert res.hits_at_k[1] == 1.0

    def test_skip_counting(self):
        triples = [(0, 0, 1), (0, 0, 7), (-1, 0, 1)]
        res = evaluate(const_scorer(np.ones(3)), triples, [], 3)
        assert res.skipped == 4
        assert res.n_queries == 2

    def test_all_skipped_raises(self):
        with pytest.raises(ValueError, match="skipped"):
            evaluate(const_scorer(np.ones(2)), [(5, 0, 6)], [], 2)

    def test_empty_test_set_raises(self):
        with pytest.raises(ValueError, match="empty"):
            evaluate(const_scorer(np.ones(2)), [], [], 2)

    def test_hits_nondecreasing_in_k(self):
        rng = np.random.default_rng(3)
        n = 20
        triples = [(int(rng.integers(n)), 0, int(rng.integers(n))) for _ in range(30)]

        def score_fn(side, r, other):
            return rng.random(n)

        res = evaluate(score_fn, triples, [], n, hits_ks=(1, 3, 10, 20))
        vals = [res.hits_at_k[k] for k in (1, 3, 10, 20)]
        assert vals == sorted(vals)

    def test_mrr_decreases_when_one_rank_worsens(self):
        base = np.array([1, 2, 4])
        worse = np.array([1, 3, 4])
        assert np.mean(1.0 / worse) < np.mean(1.0 / base)

    def test_permutation_scorer_oracle(self):
        rng = np.random.default_rng(8)
        n = 12
        perm = rng.permutation(n)
        position = np.argsort(perm)  # position[c] = rank position of candidate c

        def score_fn(side, r, other):
            return -position.astype(float)

        triples = [(int(rng.integers(n)), 0, int(rng.integers(n))) for _ in range(20)]
        res = evaluate(score_fn, triples, [], n)
        expected = []
        for h, r, t in triples:
            expected.append(int(position[h]) + 1)
            expected.append(int(position[t]) + 1)
        assert res.per_query_ranks.tolist() == expected


class TestPairedSignificance:
    def test_identical_vectors(self):
        rr = np.full(100, 0.25)
        p, significant = paired_significance(rr, rr)
        assert p == 1.0
        assert not significant

    def test_constant_shift_many_queries(self):
        rr = np.full(1000, 0.4)
        p, significant = paired_significance(rr + 0.5, rr)
        assert p < 0.001
        assert significant

    def test_two_queries_never_significant(self):
        for a, b in [((0.9, 0.4), (0.2, 0.3)), ((0.5, 0.5), (0.1, 0.2))]:
            p, significant = paired_significance(np.array(a), np.array(b))
            assert p >= 0.25
            assert not significant

    def test_exhaustive_enumeration_small_n(self):
        # n=2 with distinct positive diffs: patterns (+,+) and (-,-) reach the
        # observed |mean|, the mixed ones do not -> p = 1/2 exactly
        p, _ = paired_significance(np.array([0.9, 0.4]), np.array([0.2, 0.3]))
        assert p == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            paired_significance(np.ones(3), np.ones(4))

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(0)
        a, b = rng.random(500), rng.random(500)
        assert paired_significance(a, b) == paired_significance(a, b)
