import numpy as np
import pytest

from nnquery.choice import choice_probabilities
from nnquery.oracles import (
    CorruptedOracle,
    DeterministicOracle,
    GroundTruth,
    HumanBridgeOracle,
    MissingReplayAnswer,
    PLNoisyOracle,
    ReplayOracle,
    SessionClosed,
    noiseless_comparisons,
)
from nnquery.types import NNQuery, QueryResponse, RankingQuery


def truth_from_rows(rows) -> GroundTruth:
    return GroundTruth(embedding=np.asarray(rows, dtype=float))


class TestGroundTruth:
    def test_requires_exactly_one_source(self):
        with pytest.raises(ValueError):
            GroundTruth()
        with pytest.raises(ValueError):
            GroundTruth(embedding=np.zeros((3, 2)), features=np.zeros((3, 2)))

    def test_metric_must_be_psd(self):
        with pytest.raises(ValueError):
            GroundTruth(features=np.zeros((3, 2)), metric=np.array([[1.0, 0.0], [0.0, -1.0]]))

    def test_mahalanobis_equals_transformed_euclidean(self):
        rng = np.random.default_rng(0)
        for trial in range(5):
            x = rng.standard_normal((10, 4))
            a = rng.standard_normal((4, 4))
            m = a @ a.T
            truth = GroundTruth(features=x, metric=m)
            # sqrt(M) via eigendecomposition
            vals, vecs = np.linalg.eigh(m)
            root = vecs @ np.diag(np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
            transformed = truth_from_rows(x @ root)
            q = NNQuery(0, (1, 2, 3, 4))
            np.testing.assert_allclose(
                truth.distances(q.reference, q.candidates),
                transformed.distances(q.reference, q.candidates),
                rtol=1e-9,
            )


class TestDeterministicOracle:
    def test_argmin_winner(self):
        # reference 0 at origin, candidate distances 2, 1, 3
        truth = truth_from_rows([[0.0], [2.0], [1.0], [3.0]])
        oracle = DeterministicOracle(truth)
        resp = oracle.answer_nn(NNQuery(0, (1, 2, 3)), np.random.default_rng(0))
        assert resp.winner == 2

    def test_tie_goes_to_earlier_position(self):
        truth = truth_from_rows([[0.0], [1.0], [-1.0]])
        oracle = DeterministicOracle(truth)
        resp = oracle.answer_nn(NNQuery(0, (2, 1)), np.random.default_rng(0))
        assert resp.winner == 1

    def test_ranking_sorts_by_distance(self):
        truth = truth_from_rows([[0.0], [3.0], [1.0], [2.0]])
        oracle = DeterministicOracle(truth)
        resp = oracle.answer_ranking(RankingQuery(0, (1, 2, 3)), np.random.default_rng(0))
        assert resp.ranking == (2, 3, 1)

    def test_ranking_ties_stable(self):
        truth = truth_from_rows([[0.0], [1.0], [-1.0], [2.0]])
        oracle = DeterministicOracle(truth)
        resp = oracle.answer_ranking(RankingQuery(0, (1, 2, 3)), np.random.default_rng(0))
        assert resp.ranking == (1, 2, 3)

    def test_ranking_consistent_with_nn_at_length_two(self):
        rng = np.random.default_rng(4)
        truth = truth_from_rows(rng.standard_normal((6, 3)))
        oracle = DeterministicOracle(truth)
        q = NNQuery(2, (0, 5))
        rq = RankingQuery(2, (0, 5))
        assert (
            oracle.answer_nn(q, rng).winner == oracle.answer_ranking(rq, rng).ranking[0]
        )


class TestPLNoisyOracle:
    def test_equal_distances_uniform_frequencies(self):
        truth = truth_from_rows([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        oracle = PLNoisyOracle(truth, mu=0.5)
        rng = np.random.default_rng(7)
        q = NNQuery(0, (1, 2, 3))
        n = 10_000
        counts = np.zeros(3)
        for _ in range(n):
            counts[oracle.answer_nn(q, rng).winner - 1] += 1
        # three symmetric candidates: each frequency within 3 sigma of 1/3
        sigma = np.sqrt((1 / 3) * (2 / 3) / n)
        assert np.all(np.abs(counts / n - 1 / 3) < 3 * sigma)

    def test_matches_model_frequencies(self):
        truth = truth_from_rows([[0.0], [1.0], [2.0]])
        mu = 0.3
        oracle = PLNoisyOracle(truth, mu=mu)
        rng = np.random.default_rng(11)
        q = NNQuery(0, (1, 2))
        p = choice_probabilities(truth.embedding[[1, 2], 0], mu)
        n = 10_000
        wins = sum(oracle.answer_nn(q, rng).winner == 1 for _ in range(n))
        sigma = np.sqrt(p[0] * (1 - p[0]) / n)
        assert abs(wins / n - p[0]) < 3 * sigma


class TestCorruptedOracle:
    def test_rate_one_flips_pair(self):
        truth = truth_from_rows([[0.0], [1.0], [5.0]])
        oracle = CorruptedOracle(DeterministicOracle(truth), rate=1.0)
        rng = np.random.default_rng(0)
        q = NNQuery(0, (1, 2))
        for _ in range(20):
            assert oracle.answer_nn(q, rng).winner == 2

    def test_rate_zero_is_stream_identical(self):
        rng = np.random.default_rng(9)
        truth = truth_from_rows(rng.standard_normal((8, 2)))
        plain = PLNoisyOracle(truth, mu=0.2)
        wrapped = CorruptedOracle(PLNoisyOracle(truth, mu=0.2), rate=0.0)
        queries = [NNQuery(0, (1, 2, 3)), NNQuery(4, (5, 6, 7)), NNQuery(1, (2, 5))]
        r1 = [plain.answer_nn(q, np.random.default_rng(42)).winner for q in queries]
        # fresh generator with the same seed must yield the same stream
        rng2 = np.random.default_rng(42)
        r2 = [wrapped.answer_nn(q, rng2).winner for q in queries]
        rng1 = np.random.default_rng(42)
        r1_seq = [plain.answer_nn(q, rng1).winner for q in queries]
        assert r1_seq == r2

    def test_corruption_fraction_near_rate(self):
        rate = 0.25
        truth = truth_from_rows([[0.0], [1.0], [2.0], [3.0]])
        inner = DeterministicOracle(truth)
        oracle = CorruptedOracle(inner, rate=rate)
        rng = np.random.default_rng(5)
        q = NNQuery(0, (1, 2, 3))
        clean = inner.answer_nn(q, rng).winner
        n = 10_000
        flipped = sum(oracle.answer_nn(q, rng).winner != clean for _ in range(n))
        sigma = np.sqrt(rate * (1 - rate) / n)
        assert abs(flipped / n - rate) < 3 * sigma

    def test_rate_validation(self):
        truth = truth_from_rows([[0.0], [1.0]])
        with pytest.raises(ValueError):
            CorruptedOracle(DeterministicOracle(truth), rate=1.5)


class TestReplayOracle:
    def test_replays_stored_answer(self):
        q = NNQuery(0, (1, 2, 3))
        oracle = ReplayOracle([QueryResponse(q, 2)])
        assert oracle.answer_nn(q, np.random.default_rng(0)).winner == 2

    def test_matches_on_candidate_set_not_order(self):
        stored = NNQuery(0, (1, 2, 3))
        oracle = ReplayOracle([QueryResponse(stored, 2)])  # winner item 2
        permuted = NNQuery(0, (3, 2, 1))
        resp = oracle.answer_nn(permuted, np.random.default_rng(0))
        assert resp.winner_item == 2
        assert resp.winner == 2  # item 2 sits at position 2 of (3, 2, 1)

    def test_missing_query_raises(self):
        oracle = ReplayOracle([QueryResponse(NNQuery(0, (1, 2)), 1)])
        with pytest.raises(MissingReplayAnswer):
            oracle.answer_nn(NNQuery(0, (1, 3)), np.random.default_rng(0))

    def test_conflicting_duplicates_first_wins(self):
        q = NNQuery(0, (1, 2))
        oracle = ReplayOracle([QueryResponse(q, 1), QueryResponse(q, 2)])
        assert oracle.answer_nn(q, np.random.default_rng(0)).winner == 1


class TestHumanBridge:
    def test_blocks_until_answer(self):
        import threading

        bridge = HumanBridgeOracle()
        q = NNQuery(0, (1, 2))

        def human():
            shown = bridge.pending_query(timeout=5)
            bridge.submit_winner(2)

        thread = threading.Thread(target=human)
        thread.start()
        resp = bridge.answer_nn(q, np.random.default_rng(0))
        thread.join()
        assert resp.winner == 2

    def test_closed_session_raises(self):
        bridge = HumanBridgeOracle()
        bridge.close()
        with pytest.raises(SessionClosed):
            bridge.answer_nn(NNQuery(0, (1, 2)), np.random.default_rng(0))


def test_noiseless_comparisons_orders_by_truth():
    truth = truth_from_rows([[0.0], [1.0], [3.0]])
    out = noiseless_comparisons(truth, np.array([[0, 2, 1]]))
    assert out[0].winner == 1 and out[0].loser == 2
