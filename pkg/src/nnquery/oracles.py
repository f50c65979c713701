"""Oracles that answer similarity queries.

Simulated oracles judge from a ground truth (a true embedding, or features
under a Mahalanobis metric) either exactly, through the Plackett-Luce noise
model, or with a corruption wrapper that randomly flips winners. A replay
oracle serves answers recorded in an ingested corpus, and a bridge oracle
hands queries to a live human one at a time.
"""
from __future__ import annotations

import queue
import threading
from dataclasses import dataclass

import numpy as np

from .choice import choice_probabilities
from .types import NNQuery, PairedComparison, QueryResponse, RankingQuery, RankingResponse


@dataclass(frozen=True)
class GroundTruth:
    """True geometry the oracle judges from.

    Either ``embedding`` (Euclidean distances between its rows) or
    ``features`` with a symmetric PSD ``metric`` (Mahalanobis distances).
    """

    embedding: np.ndarray | None = None
    features: np.ndarray | None = None
    metric: np.ndarray | None = None

    def __post_init__(self) -> None:
        if (self.embedding is None) == (self.features is None):
            raise ValueError("provide exactly one of embedding or (features, metric)")
        if self.features is not None:
            if self.metric is None:
                raise ValueError("features require a metric")
            m = np.asarray(self.metric, dtype=np.float64)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("metric must be square")
            if not np.allclose(m, m.T, atol=1e-10):
                raise ValueError("metric must be symmetric")
            if np.linalg.eigvalsh(m).min() < -1e-8:
                raise ValueError("metric must be positive semidefinite")

    @property
    def n_items(self) -> int:
        rows = self.embedding if self.embedding is not None else self.features
        return rows.shape[0]

    def distances(self, reference: int, candidates: tuple[int, ...]) -> np.ndarray:
        """True distance from the reference to each candidate."""
        idx = list(candidates)
        if self.embedding is not None:
            diffs = self.embedding[idx] - self.embedding[reference]
            return np.linalg.norm(diffs, axis=1)
        diffs = self.features[idx] - self.features[reference]
        d2 = np.einsum("ij,jk,ik->i", diffs, self.metric, diffs)
        return np.sqrt(np.maximum(d2, 0.0))


class Oracle:
    """Answer source for queries. Subclasses implement the two answer calls."""

    def answer_nn(self, query: NNQuery, rng: np.random.Generator) -> QueryResponse:
        raise NotImplementedError

    def answer_ranking(self, query: RankingQuery, rng: np.random.Generator) -> RankingResponse:
        raise NotImplementedError


class DeterministicOracle(Oracle):
    """Orders candidates by their true distances; ties go to the earlier
    candidate position."""

    def __init__(self, truth: GroundTruth) -> None:
        self.truth = truth

    def answer_nn(self, query: NNQuery, rng: np.random.Generator) -> QueryResponse:
        d = self.truth.distances(query.reference, query.candidates)
        return QueryResponse(query, int(np.argmin(d)) + 1)

    def answer_ranking(self, query: RankingQuery, rng: np.random.Generator) -> RankingResponse:
        d = self.truth.distances(query.reference, query.candidates)
        order = np.argsort(d, kind="stable")
        return RankingResponse(query, tuple(int(i) + 1 for i in order))


class PLNoisyOracle(Oracle):
    """Samples answers from the Plackett-Luce model on the true distances."""

    def __init__(self, truth: GroundTruth, mu: float) -> None:
        self.truth = truth
        self.mu = mu

    def answer_nn(self, query: NNQuery, rng: np.random.Generator) -> QueryResponse:
        d = self.truth.distances(query.reference, query.candidates)
        p = choice_probabilities(d, self.mu)
        return QueryResponse(query, int(rng.choice(len(p), p=p)) + 1)

    def answer_ranking(self, query: RankingQuery, rng: np.random.Generator) -> RankingResponse:
        d = self.truth.distances(query.reference, query.candidates)
        u = 1.0 / (d * d + self.mu)
        remaining = list(range(len(u)))
        ranking = []
        while remaining:
            w = u[remaining]
            pick = int(rng.choice(len(remaining), p=w / w.sum()))
            ranking.append(remaining.pop(pick) + 1)
        return RankingResponse(query, tuple(ranking))


class CorruptedOracle(Oracle):
    """Wraps another oracle; with the configured probability the reported
    winner is replaced by a uniform draw among the remaining candidates."""

    def __init__(self, inner: Oracle, rate: float) -> None:
        if not 0.0 <= rate <= 1.0:
            raise ValueError("corruption rate must lie in [0, 1]")
        self.inner = inner
        self.rate = rate

    def answer_nn(self, query: NNQuery, rng: np.random.Generator) -> QueryResponse:
        response = self.inner.answer_nn(query, rng)
        # rate == 0 consumes no extra randomness so the wrapper is stream-identical
        # to the inner oracle.
        if self.rate == 0.0:
            return response
        if rng.random() < self.rate:
            others = [i for i in range(1, query.length + 1) if i != response.winner]
            response = QueryResponse(query, int(rng.choice(others)))
        return response

    def answer_ranking(self, query: RankingQuery, rng: np.random.Generator) -> RankingResponse:
        response = self.inner.answer_ranking(query, rng)
        if self.rate == 0.0:
            return response
        if rng.random() < self.rate:
            ranking = list(response.ranking)
            swap = int(rng.integers(1, len(ranking)))
            ranking[0], ranking[swap] = ranking[swap], ranking[0]
            response = RankingResponse(query, tuple(ranking))
        return response


class MissingReplayAnswer(KeyError):
    """The replay corpus holds no answer for the requested query."""


class ReplayOracle(Oracle):
    """Serves recorded answers; a query matches on (reference, candidate set),
    ignoring candidate order. The first recorded answer wins when a corpus
    holds conflicting duplicates."""

    def __init__(self, responses: list[QueryResponse]) -> None:
        self._answers: dict[tuple[int, frozenset[int]], int] = {}
        for r in responses:
            key = (r.query.reference, frozenset(r.query.candidates))
            self._answers.setdefault(key, r.winner_item)

    def answer_nn(self, query: NNQuery, rng: np.random.Generator) -> QueryResponse:
        key = (query.reference, frozenset(query.candidates))
        if key not in self._answers:
            raise MissingReplayAnswer(f"no recorded answer for reference {query.reference}")
        winner_item = self._answers[key]
        return QueryResponse(query, query.candidates.index(winner_item) + 1)


class SessionClosed(RuntimeError):
    """The human session behind a bridge oracle has been closed."""


class HumanBridgeOracle(Oracle):
    """Blocks each answer call until a human response is fed in from another
    thread. One outstanding query at a time."""

    def __init__(self) -> None:
        self._pending: queue.Queue[NNQuery] = queue.Queue(maxsize=1)
        self._answers: queue.Queue[int] = queue.Queue(maxsize=1)
        self._closed = threading.Event()

    def pending_query(self, timeout: float | None = None) -> NNQuery:
        """Called by the UI side: wait for the next query to display."""
        q = self._pending.get(timeout=timeout)
        return q

    def submit_winner(self, winner: int) -> None:
        """Called by the UI side: deliver the 1-based winner index."""
        self._answers.put(winner)

    def close(self) -> None:
        self._closed.set()

    def answer_nn(self, query: NNQuery, rng: np.random.Generator) -> QueryResponse:
        if self._closed.is_set():
            raise SessionClosed("human session closed")
        self._pending.put(query)
        while True:
            if self._closed.is_set():
                raise SessionClosed("human session closed")
            try:
                winner = self._answers.get(timeout=0.1)
                return QueryResponse(query, winner)
            except queue.Empty:
                continue


def noiseless_comparisons(
    truth: GroundTruth, triples: np.ndarray
) -> list[PairedComparison]:
    """Label (reference, a, b) triples by true distance: the nearer of a and b
    becomes the winner. Used to build held-out evaluation sets."""
    out = []
    for ref, a, b in np.asarray(triples, dtype=int):
        d = truth.distances(int(ref), (int(a), int(b)))
        if d[0] <= d[1]:
            out.append(PairedComparison(int(ref), int(a), int(b)))
        else:
            out.append(PairedComparison(int(ref), int(b), int(a)))
    return out
