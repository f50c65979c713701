import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnquery.types import (
    ComparisonStore,
    Embedding,
    NNQuery,
    PairedComparison,
    QueryPool,
    QueryResponse,
    RankingQuery,
    RankingResponse,
    decompose_nn,
    decompose_ranking,
    enumerate_candidate_queries,
    pairwise_distances,
    query_distances,
)


class TestTypes:
    def test_embedding_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            Embedding(np.zeros((1, 3)))
        with pytest.raises(ValueError):
            Embedding(np.array([[np.nan, 0.0], [1.0, 2.0]]))

    def test_embedding_is_readonly(self):
        z = Embedding(np.zeros((3, 2)))
        with pytest.raises(ValueError):
            z.values[0, 0] = 1.0

    def test_query_invariants(self):
        with pytest.raises(ValueError):
            NNQuery(0, (1,))
        with pytest.raises(ValueError):
            NNQuery(0, (1, 1))
        with pytest.raises(ValueError):
            NNQuery(0, (0, 1))

    def test_winner_range(self):
        q = NNQuery(0, (1, 2, 3))
        with pytest.raises(ValueError):
            QueryResponse(q, 0)
        with pytest.raises(ValueError):
            QueryResponse(q, 4)
        assert QueryResponse(q, 2).winner_item == 2

    def test_ranking_must_be_permutation(self):
        q = RankingQuery(0, (1, 2, 3))
        with pytest.raises(ValueError):
            RankingResponse(q, (1, 1, 2))
        RankingResponse(q, (3, 1, 2))

    def test_comparison_distinct(self):
        with pytest.raises(ValueError):
            PairedComparison(0, 0, 1)

    def test_pool_nonempty(self):
        with pytest.raises(ValueError):
            QueryPool(())


class TestDecomposeNN:
    def test_three_candidates_winner_first(self):
        q = NNQuery(10, (1, 2, 3))
        out = decompose_nn(QueryResponse(q, 1))
        assert out == [PairedComparison(10, 1, 2), PairedComparison(10, 1, 3)]

    def test_two_candidates_winner_second(self):
        q = NNQuery(0, (4, 5))
        out = decompose_nn(QueryResponse(q, 2))
        assert out == [PairedComparison(0, 5, 4)]

    def test_length_five_gives_four(self):
        q = NNQuery(0, (1, 2, 3, 4, 5))
        assert len(decompose_nn(QueryResponse(q, 3))) == 4

    @given(st.integers(min_value=2, max_value=8), st.data())
    def test_count_and_winner_property(self, c, data):
        winner = data.draw(st.integers(min_value=1, max_value=c))
        q = NNQuery(0, tuple(range(1, c + 1)))
        out = decompose_nn(QueryResponse(q, winner))
        assert len(out) == c - 1
        assert all(p.winner == q.candidates[winner - 1] for p in out)
        assert all(p.reference == 0 for p in out)


class TestDecomposeRanking:
    def test_transitive_closure(self):
        # candidates (a, b, c) = (1, 2, 3) ranked b, a, c
        q = RankingQuery(0, (1, 2, 3))
        out = decompose_ranking(RankingResponse(q, (2, 1, 3)))
        assert out == [
            PairedComparison(0, 2, 1),
            PairedComparison(0, 2, 3),
            PairedComparison(0, 1, 3),
        ]

    def test_length_four_gives_six(self):
        q = RankingQuery(0, (1, 2, 3, 4))
        assert len(decompose_ranking(RankingResponse(q, (1, 2, 3, 4)))) == 6

    def test_length_two_matches_nn(self):
        rq = RankingQuery(0, (1, 2))
        nq = NNQuery(0, (1, 2))
        assert decompose_ranking(RankingResponse(rq, (2, 1))) == decompose_nn(
            QueryResponse(nq, 2)
        )

    @given(st.integers(min_value=2, max_value=6))
    def test_count_property(self, c):
        q = RankingQuery(0, tuple(range(1, c + 1)))
        out = decompose_ranking(RankingResponse(q, tuple(range(1, c + 1))))
        assert len(out) == c * (c - 1) // 2


class TestQueryDistances:
    def test_duplicate_rows_distance_zero(self):
        z = Embedding(np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]))
        d = query_distances(z, NNQuery(0, (1, 2)))
        assert d[0] == 0.0

    def test_3_4_5_triangle(self):
        z = Embedding(np.array([[0.0, 0.0], [3.0, 4.0], [1.0, 0.0]]))
        d = query_distances(z, NNQuery(0, (1, 2)))
        assert d[0] == pytest.approx(5.0)

    def test_matches_elementwise_loop(self):
        rng = np.random.default_rng(0)
        z = Embedding(rng.standard_normal((12, 10)))
        q = NNQuery(3, (0, 7, 11, 5))
        d = query_distances(z, q)
        for k, c in enumerate(q.candidates):
            acc = 0.0
            for j in range(10):
                acc += (z.values[3, j] - z.values[c, j]) ** 2
            assert d[k] == pytest.approx(np.sqrt(acc), rel=1e-12)

    def test_out_of_range(self):
        z = Embedding(np.zeros((3, 2)))
        with pytest.raises(IndexError):
            query_distances(z, NNQuery(0, (1, 5)))

    def test_row_permutation_symmetry(self):
        rng = np.random.default_rng(1)
        z = rng.standard_normal((8, 3))
        perm = rng.permutation(8)
        z_perm = z[perm]
        relabel = np.empty(8, dtype=int)
        relabel[perm] = np.arange(8)
        q = NNQuery(2, (0, 5, 7))
        d1 = query_distances(Embedding(z), q)
        q2 = NNQuery(int(relabel[2]), tuple(int(relabel[c]) for c in q.candidates))
        d2 = query_distances(Embedding(z_perm), q2)
        np.testing.assert_allclose(d1, d2, rtol=1e-12)


class TestEnumerateQueries:
    def test_n20_c2_gives_171(self):
        pool = enumerate_candidate_queries(20, 2, 0)
        assert len(pool) == 171  # 19 choose 2

    def test_n4_c3_single_query(self):
        pool = enumerate_candidate_queries(4, 3, 0)
        assert len(pool) == 1
        assert pool.queries[0].candidates == (1, 2, 3)

    def test_capped_pool_distinct(self):
        rng = np.random.default_rng(5)
        pool = enumerate_candidate_queries(100, 3, 7, cap=500, rng=rng)
        assert len(pool) == 500
        assert pool.origin == "subsampled"
        seen = {q.candidates for q in pool}
        assert len(seen) == 500
        assert all(7 not in q.candidates for q in pool)

    def test_exhaustive_matches_set_enumeration(self):
        for n in (4, 6, 8):
            pool = enumerate_candidate_queries(n, 3, 1)
            expected = {
                combo
                for combo in itertools.combinations(
                    [i for i in range(n) if i != 1], 3
                )
            }
            assert {q.candidates for q in pool} == expected

    def test_too_long_rejected(self):
        with pytest.raises(ValueError):
            enumerate_candidate_queries(4, 4, 0)


class TestComparisonStore:
    def test_append_and_arrays(self):
        s = ComparisonStore()
        s.append(PairedComparison(0, 1, 2))
        s.extend([PairedComparison(3, 4, 5)])
        refs, wins, los = s.as_arrays()
        assert refs.tolist() == [0, 3]
        assert wins.tolist() == [1, 4]
        assert los.tolist() == [2, 5]

    def test_duplicates_allowed(self):
        s = ComparisonStore([PairedComparison(0, 1, 2), PairedComparison(0, 1, 2)])
        assert len(s) == 2

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            ComparisonStore().as_arrays()


def test_pairwise_distances_matches_norm():
    rng = np.random.default_rng(2)
    z = rng.standard_normal((9, 4))
    d = pairwise_distances(z)
    for i in range(9):
        for j in range(9):
            assert d[i, j] == pytest.approx(np.linalg.norm(z[i] - z[j]), abs=1e-10)
