"""Information-driven query scoring and batch selection.

A query's score is the mutual information between its (unknown) answer and
the embedding, estimated by Monte Carlo as

    I = H[mean predictive distribution] - mean[H of per-sample predictions]

with the predictive distribution given by the Plackett-Luce model on
perturbed geometry. Two samplers are provided: one perturbs embedding
coordinates, the other perturbs the reference-candidate distances directly.
A third scorer treats full-ranking queries, whose outcome space is all C!
candidate orderings; it exists mainly to quantify the cost gap against
winner-only queries.

Sampling uses common random numbers: coordinate noise is shared by all
queries within a sample index, and distance noise is keyed by candidate
item id. A given (embedding, pool, config) always scores identically, each
query's score depends only on its own geometry and noise streams, and
scores are exactly invariant to reordering candidates inside a query.

The per-sample response entropy is folded analytically: with utilities
u_c = 1/(d_c^2 + mu), T = sum u_c and W = sum u_c ln(u_c),

    H[p] = ln(T) - W / T,

which needs one log per (sample, query) instead of one per candidate.
Pools are scored per reference: references with many queries go through a
BLAS matrix product against a static candidate-indicator matrix, scattered
references through direct gathers.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .choice import entropy_rows
from .types import Embedding, NNQuery, QueryPool, pairwise_distances

_SAMPLE_CHUNK = 64
_MATMUL_MIN_QUERIES = 64

VARIANTS = ("embedding", "distances")


@dataclass(frozen=True)
class MIConfig:
    """Monte-Carlo settings for mutual-information scoring.

    sigma2 is the per-coordinate (or per-distance) perturbation variance.
    With sigma_mode="pairwise_variance" it is replaced at scoring time by the
    variance of all pairwise distances of the current embedding. sigma2 = 0
    is the noiseless limit, where every score is exactly zero.
    """

    variant: str = "distances"
    sigma2: float = 1.0
    n_samples: int = 100
    seed: int = 0
    sigma_mode: str = "fixed"  # fixed | pairwise_variance | margin

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        if self.n_samples < 1:
            raise ValueError("need at least one sample")
        if self.sigma_mode not in ("fixed", "pairwise_variance", "margin"):
            raise ValueError(f"unknown sigma_mode {self.sigma_mode!r}")


@dataclass(frozen=True)
class MIScores:
    """Scores aligned with the scored pool."""

    queries: tuple
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(zip(self.queries, self.values))


@dataclass(frozen=True)
class BatchConfig:
    """Batch of size ``batch_size``: the ``top_informative`` best-scoring
    queries plus a uniform random fill from the rest of the pool."""

    batch_size: int
    top_informative: int

    def __post_init__(self) -> None:
        if not 0 <= self.top_informative <= self.batch_size:
            raise ValueError("need 0 <= top_informative <= batch_size")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def resolve_sigma2(cfg: MIConfig, z_values: np.ndarray) -> float:
    if cfg.sigma_mode == "fixed":
        return cfg.sigma2
    if cfg.sigma_mode == "margin":
        raise ValueError(
            "sigma_mode='margin' ties sigma2 to the current margin; the caller "
            "must resolve it to a fixed value before scoring"
        )
    d = pairwise_distances(z_values)
    iu = np.triu_indices(d.shape[0], k=1)
    return float(np.var(d[iu]))


def _item_noise(seed: int, n_items: int, n_samples: int) -> np.ndarray:
    """Per-item standard-normal sample streams, shape [n_items, n_samples]."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_items, n_samples))


def _coordinate_noise(seed: int, n_samples: int, shape: tuple[int, int]) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_samples, *shape))


class _DistanceSampler:
    """Gaussian noise on reference-candidate distances, keyed by candidate.

    A sampled distance enters the choice model squared, so its sign is
    irrelevant and negative draws are kept rather than clamped.
    """

    def __init__(self, z: np.ndarray, sigma: float, seed: int, n_samples: int) -> None:
        self.d_base = pairwise_distances(z)
        self.sigma = sigma
        self.noise = _item_noise(seed, z.shape[0], n_samples)

    def reference_rows(self, ref: int, lo: int, hi: int) -> np.ndarray:
        """Sampled distances from one reference to every item, [chunk, N]."""
        return self.d_base[ref][None, :] + self.sigma * self.noise[:, lo:hi].T

    def query_rows(self, refs: np.ndarray, cands: np.ndarray, lo: int, hi: int) -> np.ndarray:
        """Sampled distances for explicit (ref, candidate) pairs, [chunk, Q, C]."""
        base = self.d_base[refs[:, None], cands]
        return base[None, :, :] + self.sigma * np.moveaxis(
            self.noise[cands, lo:hi], 2, 0
        )


class _EmbeddingSampler:
    """Gaussian noise on every embedding coordinate, shared across queries
    within a sample index."""

    def __init__(self, z: np.ndarray, sigma: float, seed: int, n_samples: int) -> None:
        self.z = z
        self.sigma = sigma
        self.noise = _coordinate_noise(seed, n_samples, z.shape)

    def _z_tilde(self, lo: int, hi: int) -> np.ndarray:
        return self.z[None, :, :] + self.sigma * self.noise[lo:hi]

    def reference_rows(self, ref: int, lo: int, hi: int) -> np.ndarray:
        z_tilde = self._z_tilde(lo, hi)
        diffs = z_tilde - z_tilde[:, ref : ref + 1, :]
        return np.sqrt(np.sum(diffs * diffs, axis=2))

    def query_rows(self, refs: np.ndarray, cands: np.ndarray, lo: int, hi: int) -> np.ndarray:
        z_tilde = self._z_tilde(lo, hi)
        a = z_tilde[:, refs, :][:, :, None, :]
        b = z_tilde[:, cands, :]
        diffs = a - b
        return np.sqrt(np.sum(diffs * diffs, axis=3))


def _score_with_sampler(
    queries: tuple, n_items: int, sampler, n_samples: int, mu: float
) -> np.ndarray:
    values = np.zeros(len(queries))
    by_length: dict[int, list[int]] = {}
    for i, q in enumerate(queries):
        by_length.setdefault(q.length, []).append(i)
    for length, idx_list in by_length.items():
        idx = np.array(idx_list, dtype=np.intp)
        refs = np.array([queries[i].reference for i in idx], dtype=np.intp)
        cands = np.array([queries[i].candidates for i in idx], dtype=np.intp)
        p_sum = np.zeros((len(idx), length))
        h_sum = np.zeros(len(idx))
        heavy, scattered = _split_by_reference(refs, cands, n_items)
        for lo in range(0, n_samples, _SAMPLE_CHUNK):
            hi = min(lo + _SAMPLE_CHUNK, n_samples)
            for ref, rows, ref_cands, indicator in heavy:
                d = sampler.reference_rows(ref, lo, hi)
                with np.errstate(divide="ignore", invalid="ignore"):
                    u = 1.0 / (d * d + mu)
                    w = u * np.log(u)
                # the reference is never its own candidate; zeroing the self
                # column keeps a zero self-distance from polluting the matmul
                u[:, ref] = 0.0
                w[:, ref] = 0.0
                t = u @ indicator
                w_tot = w @ indicator
                inv_t = 1.0 / t
                h_sum[rows] += (np.log(t) - w_tot * inv_t).sum(axis=0)
                b = u.T @ inv_t
                p_sum[rows] += b[ref_cands, np.arange(len(rows))[:, None]]
            if scattered is not None:
                rows = scattered
                d = sampler.query_rows(refs[rows], cands[rows], lo, hi)
                u = 1.0 / (d * d + mu)
                w = u * np.log(u)
                t = u.sum(axis=2)
                w_tot = w.sum(axis=2)
                h_sum[rows] += (np.log(t) - w_tot / t).sum(axis=0)
                p_sum[rows] += (u / t[:, :, None]).sum(axis=0)
        p_bar = p_sum / n_samples
        values[idx] = entropy_rows(p_bar) - h_sum / n_samples
    return values


def _split_by_reference(
    refs: np.ndarray, cands: np.ndarray, n_items: int
) -> tuple[list, np.ndarray | None]:
    """Partition a length group into per-reference matmul work and a
    residual gather block."""
    heavy = []
    scattered_rows = []
    for ref in np.unique(refs):
        rows = np.flatnonzero(refs == ref)
        if len(rows) < _MATMUL_MIN_QUERIES:
            scattered_rows.append(rows)
            continue
        ref_cands = cands[rows]
        width = ref_cands.shape[1]
        indicator = np.zeros((n_items, len(rows)))
        indicator[ref_cands.ravel(), np.repeat(np.arange(len(rows)), width)] = 1.0
        heavy.append((int(ref), rows, ref_cands, indicator))
    scattered = np.concatenate(scattered_rows) if scattered_rows else None
    return heavy, scattered


def score_mi_embedding(
    embedding: Embedding, pool: QueryPool, cfg: MIConfig, mu: float
) -> MIScores:
    """Score a pool by perturbing embedding coordinates."""
    queries = tuple(pool)
    if not queries:
        raise ValueError("pool is empty")
    z = embedding.values
    sigma2 = resolve_sigma2(cfg, z)
    if sigma2 == 0.0:
        return MIScores(queries, np.zeros(len(queries)))
    sampler = _EmbeddingSampler(z, np.sqrt(sigma2), cfg.seed, cfg.n_samples)
    values = _score_with_sampler(queries, embedding.n_items, sampler, cfg.n_samples, mu)
    return MIScores(queries, values)


def score_mi_distances(
    embedding: Embedding, pool: QueryPool, cfg: MIConfig, mu: float
) -> MIScores:
    """Score a pool by perturbing reference-candidate distances directly."""
    queries = tuple(pool)
    if not queries:
        raise ValueError("pool is empty")
    z = embedding.values
    sigma2 = resolve_sigma2(cfg, z)
    if sigma2 == 0.0:
        return MIScores(queries, np.zeros(len(queries)))
    sampler = _DistanceSampler(z, np.sqrt(sigma2), cfg.seed, cfg.n_samples)
    values = _score_with_sampler(queries, embedding.n_items, sampler, cfg.n_samples, mu)
    return MIScores(queries, values)


MAX_RANKING_LENGTH = 6


def score_mi_ranking(
    embedding: Embedding, pool, cfg: MIConfig, mu: float
) -> MIScores:
    """Mutual information of full-ranking queries.

    The outcome variable ranges over all C! orderings, with sequential
    choice-without-replacement probabilities from the same utility model.
    Distance noise is drawn exactly as in score_mi_distances, so a length-2
    ranking query scores identically to the matching winner-only query.
    """
    queries = tuple(pool)
    if not queries:
        raise ValueError("pool is empty")
    for q in queries:
        if q.length > MAX_RANKING_LENGTH:
            raise ValueError(
                f"ranking outcome space is factorial; length {q.length} exceeds "
                f"the supported maximum of {MAX_RANKING_LENGTH}"
            )
    z = embedding.values
    sigma2 = resolve_sigma2(cfg, z)
    values = np.zeros(len(queries))
    if sigma2 == 0.0:
        return MIScores(queries, values)
    sigma = np.sqrt(sigma2)
    noise = _item_noise(cfg.seed, embedding.n_items, cfg.n_samples)
    d_base = pairwise_distances(z)
    perms_by_length = {
        length: np.array(list(itertools.permutations(range(length))), dtype=np.intp)
        for length in sorted({q.length for q in queries})
    }
    for i, q in enumerate(queries):
        cands = np.array(q.candidates, dtype=np.intp)
        d = d_base[q.reference, cands][:, None] + sigma * noise[cands]
        u = (1.0 / (d * d + mu)).T  # [n_samples, C]
        perms = perms_by_length[q.length]
        u_perm = u[:, perms]  # [n_samples, C!, C]
        suffix = np.cumsum(u_perm[:, :, ::-1], axis=2)[:, :, ::-1]
        probs = np.prod(u_perm / suffix, axis=2)
        p_bar = probs.mean(axis=0)
        values[i] = entropy_rows(p_bar) - entropy_rows(probs).mean()
    return MIScores(queries, values)


def score_pool(embedding: Embedding, pool: QueryPool, cfg: MIConfig, mu: float) -> MIScores:
    """Dispatch on the configured sampling variant."""
    if cfg.variant == "embedding":
        return score_mi_embedding(embedding, pool, cfg, mu)
    return score_mi_distances(embedding, pool, cfg, mu)


def select_batch_top_random(
    scores: MIScores, cfg: BatchConfig, rng: np.random.Generator
) -> list[NNQuery]:
    """The top-scoring queries plus a uniform random fill, without duplicates.

    Score ties resolve to the lower pool index.
    """
    n = len(scores)
    if n < cfg.batch_size:
        raise ValueError(f"pool of {n} cannot supply a batch of {cfg.batch_size}")
    order = np.argsort(-scores.values, kind="stable")
    top = order[: cfg.top_informative]
    n_fill = cfg.batch_size - cfg.top_informative
    rest = np.setdiff1d(np.arange(n), top, assume_unique=True)
    fill = rng.choice(rest, size=n_fill, replace=False) if n_fill else np.array([], dtype=int)
    return [scores.queries[i] for i in (*top, *fill)]


def build_classification_pool(
    embedding: Embedding,
    labeled: list[tuple[int, int]],
    unlabeled: list[int],
    max_candidates: int,
) -> QueryPool:
    """One query per unlabeled item against its nearest labeled neighbors.

    For each unlabeled item, the candidate list holds the nearest labeled
    representative of each of the closest distinct classes (at most
    ``max_candidates`` of them), ordered nearest class first. Answering such
    a query is equivalent to assigning the item's class label.
    """
    if not labeled:
        raise ValueError("need labeled items")
    items = np.array([i for i, _ in labeled], dtype=np.intp)
    labels = np.array([y for _, y in labeled], dtype=np.intp)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("need at least 2 labeled classes to form queries")
    z = embedding.values
    width = min(max_candidates, classes.size)
    queries = []
    for u in sorted(unlabeled):
        d = np.linalg.norm(z[items] - z[u], axis=1)
        per_class = []
        for c in classes:
            mask = labels == c
            class_items = items[mask]
            class_d = d[mask]
            best = np.lexsort((class_items, class_d))[0]
            per_class.append((class_d[best], int(c), int(class_items[best])))
        per_class.sort()
        queries.append(NNQuery(u, tuple(item for _, _, item in per_class[:width])))
    return QueryPool(tuple(queries), origin="classification-built")


def kmeans_labels(
    rows: np.ndarray, k: int, seed: int, max_iters: int = 100
) -> np.ndarray:
    """Lloyd's algorithm with seeded farthest-point initialization.

    Stops when assignments stop changing; an emptied cluster keeps its
    previous center. Returns a group id per row.
    """
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    if k > n:
        raise ValueError(f"cannot form {k} clusters from {n} points")
    rng = np.random.default_rng(seed)
    centers = [rows[int(rng.integers(n))]]
    for _ in range(1, k):
        d_min = np.min(
            [np.linalg.norm(rows - c, axis=1) for c in centers], axis=0
        )
        centers.append(rows[int(np.argmax(d_min))])
    centers = np.array(centers)
    assign = np.full(n, -1, dtype=np.intp)
    for _ in range(max_iters):
        d = np.linalg.norm(rows[:, None, :] - centers[None, :, :], axis=2)
        new_assign = np.argmin(d, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = rows[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return assign


def knn_majority_labels(
    rows: np.ndarray,
    labeled_rows: np.ndarray,
    labeled_labels: np.ndarray,
    k: int = 5,
) -> np.ndarray:
    """Group each row by the majority label of its k nearest labeled rows.

    Majority ties resolve to the single nearest neighbor's label; distance
    ties resolve to the lower labeled index.
    """
    rows = np.asarray(rows, dtype=np.float64)
    labeled_rows = np.asarray(labeled_rows, dtype=np.float64)
    labeled_labels = np.asarray(labeled_labels, dtype=np.intp)
    k = min(k, len(labeled_rows))
    out = np.empty(len(rows), dtype=np.intp)
    for i, r in enumerate(rows):
        d = np.linalg.norm(labeled_rows - r, axis=1)
        nearest = np.lexsort((np.arange(len(d)), d))[:k]
        near_labels = labeled_labels[nearest]
        counts = np.bincount(near_labels)
        winners = np.flatnonzero(counts == counts.max())
        out[i] = winners[0] if len(winners) == 1 else near_labels[0]
    return out


def select_batch_clustered(
    embedding: Embedding,
    labeled: list[tuple[int, int]],
    unlabeled: list[int],
    batch_size: int,
    query_length: int,
    cfg: MIConfig,
    mu: float,
    clustering: str = "kmeans",
    n_groups: int | None = None,
    cluster_seed: int = 0,
    knn_k: int = 5,
) -> list[int]:
    """Pick the most informative unlabeled items, spread across clusters.

    Scores every unlabeled item's nearest-class query, partitions the
    unlabeled set into groups (k-means over embedding rows, or majority
    label of the k nearest labeled items), then takes the best-scoring items
    per group round-robin until the batch is full.
    """
    if len(unlabeled) < batch_size:
        raise ValueError("not enough unlabeled items for the batch")
    pool = build_classification_pool(embedding, labeled, unlabeled, query_length)
    scores = score_mi_distances(embedding, pool, cfg, mu)
    pool_items = np.array([q.reference for q in scores.queries], dtype=np.intp)
    rows = embedding.values[pool_items]
    if clustering == "kmeans":
        k = n_groups or len({y for _, y in labeled})
        k = min(k, len(pool_items))
        groups = kmeans_labels(rows, k, cluster_seed)
    elif clustering == "knn_vote":
        labeled_items = np.array([i for i, _ in labeled], dtype=np.intp)
        labeled_y = np.array([y for _, y in labeled], dtype=np.intp)
        groups = knn_majority_labels(
            rows, embedding.values[labeled_items], labeled_y, k=knn_k
        )
    else:
        raise ValueError(f"unknown clustering {clustering!r}")
    group_ids = np.unique(groups)
    if group_ids.size < 1:
        raise ValueError("clustering produced no groups")
    queues = []
    for g in group_ids:
        members = np.flatnonzero(groups == g)
        ranked = members[np.argsort(-scores.values[members], kind="stable")]
        queues.append(list(ranked))
    selected: list[int] = []
    while len(selected) < batch_size:
        progressed = False
        for q in queues:
            if q and len(selected) < batch_size:
                selected.append(int(pool_items[q.pop(0)]))
                progressed = True
        if not progressed:
            raise ValueError("ran out of candidates before filling the batch")
    return selected
