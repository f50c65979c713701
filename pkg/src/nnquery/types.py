"""Core value types: embeddings, similarity queries, responses, and their
decomposition into paired comparisons.

Items are referred to by 0-based integer ids indexing rows of the dataset.
Winner indices in query responses are 1-based positions into the candidate
list; file formats use the same convention.

All types here are immutable value objects and safe to share across threads.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

import numpy as np

ItemId = int


def _as_readonly(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Embedding:
    """An N x D matrix of embedding coordinates, one row per item."""

    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_readonly(self.values))
        if self.values.ndim != 2:
            raise ValueError("embedding must be a 2-D matrix")
        n, d = self.values.shape
        if n < 2 or d < 1:
            raise ValueError(f"embedding needs at least 2 items and 1 dimension, got {n}x{d}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding contains non-finite entries")

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NNQuery:
    """A reference item compared against an ordered list of candidates.

    The oracle names the candidate most similar to the reference.
    """

    reference: ItemId
    candidates: tuple[ItemId, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", tuple(int(c) for c in self.candidates))
        object.__setattr__(self, "reference", int(self.reference))
        if len(self.candidates) < 2:
            raise ValueError("a query needs at least 2 candidates")
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError("candidates must be distinct")
        if self.reference in self.candidates:
            raise ValueError("reference may not appear among the candidates")

    @property
    def length(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class QueryResponse:
    """An answered query; ``winner`` is the 1-based candidate position."""

    query: NNQuery
    winner: int

    def __post_init__(self) -> None:
        if not 1 <= self.winner <= self.query.length:
            raise ValueError(f"winner must be in 1..{self.query.length}, got {self.winner}")

    @property
    def winner_item(self) -> ItemId:
        return self.query.candidates[self.winner - 1]


@dataclass(frozen=True)
class RankingQuery:
    """A reference item whose candidates are to be fully ordered by similarity."""

    reference: ItemId
    candidates: tuple[ItemId, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", tuple(int(c) for c in self.candidates))
        object.__setattr__(self, "reference", int(self.reference))
        if len(self.candidates) < 2:
            raise ValueError("a query needs at least 2 candidates")
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError("candidates must be distinct")
        if self.reference in self.candidates:
            raise ValueError("reference may not appear among the candidates")

    @property
    def length(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class RankingResponse:
    """An answered ranking query.

    ``ranking`` is a permutation of 1-based candidate positions, most- to
    least-similar.
    """

    query: RankingQuery
    ranking: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ranking", tuple(int(r) for r in self.ranking))
        if sorted(self.ranking) != list(range(1, self.query.length + 1)):
            raise ValueError("ranking must be a permutation of 1..C")


@dataclass(frozen=True)
class PairedComparison:
    """Reference is closer to ``winner`` than to ``loser``."""

    reference: ItemId
    winner: ItemId
    loser: ItemId

    def __post_init__(self) -> None:
        if len({self.reference, self.winner, self.loser}) != 3:
            raise ValueError("a comparison needs three distinct items")


@dataclass(frozen=True)
class QueryPool:
    """A pool of candidate queries with a record of how it was constructed."""

    queries: tuple[NNQuery, ...]
    origin: str = "enumerated"  # enumerated | subsampled | classification-built | ingested

    def __post_init__(self) -> None:
        object.__setattr__(self, "queries", tuple(self.queries))
        if not self.queries:
            raise ValueError("query pool may not be empty")

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)


def decompose_nn(response: QueryResponse) -> list[PairedComparison]:
    """Split an answered query into C-1 paired comparisons.

    The winner beats every other candidate; output follows candidate order.
    """
    q = response.query
    w = response.winner_item
    return [
        PairedComparison(q.reference, w, c)
        for c in q.candidates
        if c != w
    ]


def decompose_ranking(response: RankingResponse) -> list[PairedComparison]:
    """Split an answered ranking into its C(C-1)/2 paired comparisons.

    Every earlier-ranked candidate beats every later-ranked one.
    """
    q = response.query
    ordered = [q.candidates[pos - 1] for pos in response.ranking]
    out = []
    for i in range(len(ordered)):
        for j in range(i + 1, len(ordered)):
            out.append(PairedComparison(q.reference, ordered[i], ordered[j]))
    return out


def query_distances(embedding: Embedding, query: NNQuery | RankingQuery) -> np.ndarray:
    """Euclidean distance from the reference row to each candidate row."""
    n = embedding.n_items
    ids = (query.reference, *query.candidates)
    for i in ids:
        if not 0 <= i < n:
            raise IndexError(f"item id {i} out of range for embedding with {n} items")
    ref = embedding.values[query.reference]
    cands = embedding.values[list(query.candidates)]
    return np.linalg.norm(cands - ref, axis=1)


def pairwise_distances(values: np.ndarray) -> np.ndarray:
    """Full N x N Euclidean distance matrix for the rows of ``values``."""
    sq = np.sum(values * values, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (values @ values.T)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def max_pairwise_distance(values: np.ndarray) -> float:
    return float(np.max(pairwise_distances(values)))


def enumerate_candidate_queries(
    n_items: int,
    length: int,
    reference: ItemId,
    cap: int | None = None,
    rng: np.random.Generator | None = None,
) -> QueryPool:
    """All candidate sets of the given length for one reference.

    When the full count (N-1 choose C) exceeds ``cap``, a uniform sample of
    ``cap`` distinct candidate sets is drawn instead (requires ``rng``).
    Candidate sets are canonicalized in ascending id order.
    """
    if length > n_items - 1:
        raise ValueError(f"cannot form length-{length} queries from {n_items} items")
    others = [i for i in range(n_items) if i != reference]
    total = _n_choose_k(len(others), length)
    if cap is None or total <= cap:
        queries = tuple(
            NNQuery(reference, combo) for combo in itertools.combinations(others, length)
        )
        return QueryPool(queries, origin="enumerated")
    if rng is None:
        raise ValueError("subsampling a capped pool requires an rng")
    others_arr = np.array(others)
    seen: set[tuple[int, ...]] = set()
    picked: list[NNQuery] = []
    while len(picked) < cap:
        # batched rejection sampling: random keys per row give uniform subsets
        keys = rng.random((2 * (cap - len(picked)), len(others_arr)))
        subsets = np.sort(others_arr[np.argpartition(keys, length - 1, axis=1)[:, :length]], axis=1)
        for row in subsets:
            combo = tuple(int(x) for x in row)
            if combo in seen:
                continue
            seen.add(combo)
            picked.append(NNQuery(reference, combo))
            if len(picked) == cap:
                break
    return QueryPool(tuple(picked), origin="subsampled")


def _n_choose_k(n: int, k: int) -> int:
    import math

    return math.comb(n, k)


class ComparisonStore:
    """Append-only store of paired comparisons gathered from query answers.

    Duplicates are allowed: repeat answers are legal evidence.
    """

    def __init__(self, comparisons: Iterable[PairedComparison] = ()) -> None:
        self._items: list[PairedComparison] = list(comparisons)
        self._arrays: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def append(self, comparison: PairedComparison) -> None:
        self._items.append(comparison)
        self._arrays = None

    def extend(self, comparisons: Iterable[PairedComparison]) -> None:
        self._items.extend(comparisons)
        self._arrays = None

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i: int) -> PairedComparison:
        return self._items[i]

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(references, winners, losers) as integer arrays; cached until the
        next append."""
        if not self._items:
            raise ValueError("comparison store is empty")
        if self._arrays is None:
            refs = np.array([c.reference for c in self._items], dtype=np.intp)
            wins = np.array([c.winner for c in self._items], dtype=np.intp)
            loses = np.array([c.loser for c in self._items], dtype=np.intp)
            self._arrays = (refs, wins, loses)
        return self._arrays
