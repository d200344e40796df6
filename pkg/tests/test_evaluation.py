import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfwgan.data import InteractionMatrix, SplitDataset
from cfwgan.evaluation import (
    LearningCurve,
    MetricsReport,
    evaluate_model,
    evaluate_scores,
    ndcg_at_k,
    precision_at_k,
    rank_items,
    recall_at_k,
)


def brute_force_ndcg(ranked, test, k):
    """DCG of the list divided by the best DCG over every ordering of the candidate pool."""
    def dcg(order):
        return sum(1.0 / math.log2(i + 2) for i, item in enumerate(order[:k]) if item in test)

    pool = list(ranked) + [t for t in test if t not in ranked]
    best = max(dcg(p) for p in itertools.permutations(pool, min(k, len(pool))))
    return dcg(list(ranked)) / best


def set_precision(ranked, test, k):
    return len(set(ranked[:k]) & set(test)) / k


def set_recall(ranked, test, k):
    return len(set(ranked[:k]) & set(test)) / len(set(test))


class TestRanking:
    def test_exclusion(self):
        assert list(rank_items([0.9, 0.1, 0.5], exclude={0}, k=2)) == [2, 1]

    def test_ties_go_to_lower_index(self):
        assert list(rank_items([1.0, 1.0, 1.0, 1.0], k=3)) == [0, 1, 2]

    def test_truncation(self):
        assert list(rank_items(np.arange(5.0), exclude=[0, 1, 2, 3], k=5)) == [4]

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            rank_items([1.0], k=0)


class TestMetrics:
    def test_precision(self):
        assert precision_at_k([1, 2, 3, 4, 5], {1, 2, 3, 4, 5}, 5) == 1.0
        assert precision_at_k([1, 2, 3, 4, 5], {1, 3, 9}, 5) == 0.4
        # denominator stays k for a short list
        assert precision_at_k([1], {1}, 5) == 0.2

    def test_recall(self):
        assert recall_at_k([3, 1], {1, 3}, 5) == 1.0
        assert recall_at_k([0, 7, 8], {0, 1, 2, 3}, 3) == 0.25

    def test_ndcg_examples(self):
        assert ndcg_at_k([4, 2, 9], {4, 2, 9}, 3) == 1.0
        assert ndcg_at_k([1, 5, 2], {1, 2}, 3) == pytest.approx(1.5 / (1 + 1 / math.log2(3)))
        assert ndcg_at_k([1, 5, 2], {1, 2}, 3) == pytest.approx(0.9197, abs=1e-4)

    @pytest.mark.parametrize("n", range(1, 7))
    def test_ndcg_matches_permutation_oracle(self, n):
        rng = np.random.default_rng(n)
        for _ in range(30):
            ranked = list(rng.permutation(10)[:n])
            test = set(rng.choice(10, int(rng.integers(1, 5)), replace=False).tolist())
            for k in range(1, n + 1):
                assert ndcg_at_k(ranked, test, k) == pytest.approx(brute_force_ndcg(ranked, test, k), abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.permutations(range(12)), st.sets(st.integers(0, 11), min_size=1, max_size=8), st.integers(1, 12))
    def test_counting_oracles(self, order, test, k):
        ranked = list(order)
        assert precision_at_k(ranked, test, k) == set_precision(ranked, test, k)
        assert recall_at_k(ranked, test, k) == set_recall(ranked, test, k)
        hits = len(set(ranked[:k]) & test)
        assert hits <= min(k, len(test))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=5, max_size=5, unique=True), st.sets(st.integers(0, 20), min_size=1, max_size=6))
    def test_adding_a_hit_never_hurts(self, ranked, test):
        misses = [i for i, item in enumerate(ranked) if item not in test]
        extra = [t for t in test if t not in ranked]
        if not misses or not extra:
            return
        better = list(ranked)
        better[misses[0]] = extra[0]
        for metric in (precision_at_k, recall_at_k, ndcg_at_k):
            assert metric(better, test, 5) >= metric(ranked, test, 5)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=8, max_size=8), st.floats(0.01, 100))
    def test_positive_scaling_keeps_ranking(self, scores, c):
        scores = np.array(scores)
        assert np.array_equal(rank_items(scores, k=5), rank_items(c * scores, k=5))


def tiny_split():
    rows = lambda *r: tuple(np.array(x, dtype=np.int64) for x in r)  # noqa: E731
    train = InteractionMatrix(3, 6, rows([0, 1], [2], [3]))
    valid = InteractionMatrix(3, 6, rows([2], [], [4]))
    test = InteractionMatrix(3, 6, rows([3, 4], [5], []))
    return SplitDataset(train, valid, test)


class TestEvaluate:
    def test_oracle_scorer_is_maximal(self):
        split = tiny_split()
        truth = split.test.to_dense()
        # only users 0 and 1 have test items, so they are the whole batch
        rep = evaluate_model(lambda c: truth[[0, 1]], split, "test", batch_size=10)
        assert rep.n_users == 2 and rep.n_skipped == 1
        assert rep.N5 == rep.N20 == 1.0 and rep.R5 == rep.R20 == 1.0
        assert rep.P5 == pytest.approx((2 / 5 + 1 / 5) / 2)

    def test_exclusion_per_protocol(self):
        split = tiny_split()
        seen = []

        def score(cond):
            seen.append(cond.copy())
            return np.zeros_like(cond)

        evaluate_model(score, split, "valid")
        evaluate_model(score, split, "test")
        # validation conditions on train only; test conditions on train + validation
        assert seen[0][0].tolist() == [1, 1, 0, 0, 0, 0]
        assert seen[1][0].tolist() == [1, 1, 1, 0, 0, 0]

    def test_no_evaluable_users(self):
        m = InteractionMatrix(1, 3, (np.array([0]),))
        empty = InteractionMatrix(1, 3, (np.array([], dtype=np.int64),))
        with pytest.raises(ValueError):
            evaluate_scores(np.zeros_like, m, empty)

    def test_wrong_score_shape(self):
        split = tiny_split()
        with pytest.raises(ValueError, match="shape"):
            evaluate_model(lambda c: np.zeros((len(c), 2)), split)

    def test_deterministic(self):
        split = tiny_split()
        rng = np.random.default_rng(0)
        fixed = rng.random((3, 6))

        def score(c):
            return fixed[: len(c)]

        assert evaluate_model(score, split, "valid") == evaluate_model(score, split, "valid")

    def test_random_scorer_below_popularity(self, ml100k):
        from cfwgan.baselines import itempop_scores
        from cfwgan.data import load_split

        split = load_split(ml100k)
        rng = np.random.default_rng(0)
        rand = evaluate_model(lambda c: rng.random(c.shape), split)
        pop = itempop_scores(split.train_full())
        popular = evaluate_model(lambda c: np.tile(pop, (len(c), 1)), split)
        assert rand.P5 < 0.1 < popular.P5


class TestLearningCurve:
    def test_epochs_strictly_increase_per_split(self):
        curve = LearningCurve()
        rep = MetricsReport(0, 0, 0, 0, 0, 0.1)
        curve.add(5, "valid", rep)
        curve.add(1, "test", rep)
        with pytest.raises(ValueError):
            curve.add(5, "valid", rep)

    def test_best(self):
        curve = LearningCurve()
        for e, s in [(5, 0.1), (10, 0.3), (15, 0.2)]:
            curve.add(e, "valid", MetricsReport(0, 0, 0, 0, 0, s))
        assert curve.best()[0] == 10
