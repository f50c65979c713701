"""Evaluation metrics for learned embeddings.

All metrics depend on the embedding only through inter-item distances, so
they are invariant under rigid motions. Distance ties are broken by item
index wherever a ranking is induced, which keeps every metric deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import Embedding, PairedComparison, pairwise_distances


@dataclass(frozen=True)
class TrialStats:
    """Median and quartiles of a metric across trials, per cycle."""

    median: np.ndarray
    q25: np.ndarray
    q75: np.ndarray

    @classmethod
    def from_trials(cls, values: np.ndarray) -> "TrialStats":
        """values: [n_trials, n_cycles]."""
        values = np.asarray(values, dtype=np.float64)
        return cls(
            median=np.median(values, axis=0),
            q25=np.percentile(values, 25, axis=0),
            q75=np.percentile(values, 75, axis=0),
        )


def triplet_generalization_accuracy(
    embedding: Embedding, test: list[PairedComparison]
) -> float:
    """Fraction of held-out comparisons the embedding orders correctly.

    Exact distance ties count as incorrect.
    """
    if not test:
        raise ValueError("empty test set")
    z = embedding.values
    refs = np.array([c.reference for c in test])
    wins = np.array([c.winner for c in test])
    los = np.array([c.loser for c in test])
    dw = np.linalg.norm(z[refs] - z[wins], axis=1)
    dl = np.linalg.norm(z[refs] - z[los], axis=1)
    return float(np.mean(dw < dl))


def kendall_tau(a, b) -> float:
    """Tau-a rank correlation between two orderings of the same items."""
    a = list(a)
    b = list(b)
    if len(a) < 2:
        raise ValueError("rankings need at least 2 items")
    if sorted(a) != sorted(b):
        raise ValueError("rankings must cover the same items")
    pos_b = {item: i for i, item in enumerate(b)}
    seq = np.array([pos_b[item] for item in a])
    m = len(seq)
    later = seq[None, :] - seq[:, None]
    upper = np.triu_indices(m, k=1)
    concordant = np.sum(later[upper] > 0)
    discordant = np.sum(later[upper] < 0)
    return float((concordant - discordant) / (m * (m - 1) / 2))


def _distance_ranking(dist_row: np.ndarray, exclude: int) -> list[int]:
    """Items ordered by distance, ties broken by item index, self excluded."""
    items = np.array([i for i in range(len(dist_row)) if i != exclude])
    order = np.lexsort((items, dist_row[items]))
    return [int(items[i]) for i in order]


def aggregate_kendall(est: Embedding, truth: Embedding) -> float:
    """Mean rank correlation of distance-induced orderings over all
    references."""
    if est.n_items != truth.n_items:
        raise ValueError("embeddings must cover the same items")
    n = est.n_items
    if n < 3:
        raise ValueError("need at least 3 items")
    d_est = pairwise_distances(est.values)
    d_true = pairwise_distances(truth.values)
    taus = [
        kendall_tau(_distance_ranking(d_est[i], i), _distance_ranking(d_true[i], i))
        for i in range(n)
    ]
    return float(np.mean(taus))


def _neighbor_lists(z: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest neighbors of each item, self excluded."""
    n = z.shape[0]
    d = pairwise_distances(z)
    neighbors = np.empty((n, k), dtype=np.intp)
    for i in range(n):
        neighbors[i] = _distance_ranking(d[i], i)[:k]
    return neighbors


def recall_at_k(embedding: Embedding, labels: np.ndarray, k: int) -> float:
    """Fraction of items with at least one same-class item among their k
    nearest neighbors."""
    labels = np.asarray(labels)
    n = embedding.n_items
    if k >= n:
        raise ValueError("k must be smaller than the item count")
    neighbors = _neighbor_lists(embedding.values, k)
    hits = [np.any(labels[neighbors[i]] == labels[i]) for i in range(n)]
    return float(np.mean(hits))


def top_fraction_at_k(embedding: Embedding, top_set: set[int], k: int) -> float:
    """Average fraction of top-set items among the k nearest neighbors of
    each top-set member."""
    if not top_set:
        raise ValueError("top set may not be empty")
    n = embedding.n_items
    if k >= n:
        raise ValueError("k must be smaller than the item count")
    neighbors = _neighbor_lists(embedding.values, k)
    members = np.zeros(n, dtype=bool)
    members[list(top_set)] = True
    fractions = [members[neighbors[t]].mean() for t in sorted(top_set)]
    return float(np.mean(fractions))
