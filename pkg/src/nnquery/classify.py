"""Active classification: label acquisition loop and baseline strategies.

The loop follows the standard pool-based protocol: train on the labeled
set, pick a batch of unlabeled items to label, move them with their true
labels, retrain from scratch, and score on held-out data. Desk-scale
classifiers stand in for large networks; the acquisition strategies are the
object of study and operate on the model's feature rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acquisition import MIConfig, select_batch_clustered
from .choice import choice_probabilities, entropy_rows
from .types import Embedding, pairwise_distances

ACQUISITIONS = ("mi_clustered", "max_entropy", "random", "k_center")


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "multinomial_logit"  # nearest_centroid | knn | multinomial_logit
    knn_k: int = 5
    centroid_mu: float = 1.0
    lr: float = 0.5
    epochs: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("nearest_centroid", "knn", "multinomial_logit"):
            raise ValueError(f"unknown model kind {self.kind!r}")


class _NearestCentroid:
    def __init__(self, cfg: ModelConfig) -> None:
        self.mu = cfg.centroid_mu

    def fit(self, x: np.ndarray, y: np.ndarray) -> None:
        self.classes_ = np.unique(y)
        self.centroids_ = np.array([x[y == c].mean(axis=0) for c in self.classes_])

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(x[:, None, :] - self.centroids_[None, :, :], axis=2)
        return np.vstack([choice_probabilities(row, self.mu) for row in d])

    def embed(self, x: np.ndarray) -> np.ndarray:
        return x


class _KNN:
    def __init__(self, cfg: ModelConfig) -> None:
        self.k = cfg.knn_k

    def fit(self, x: np.ndarray, y: np.ndarray) -> None:
        self.classes_ = np.unique(y)
        self.x_ = x
        self.y_ = y

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        k = min(self.k, len(self.x_))
        out = np.zeros((len(x), len(self.classes_)))
        class_index = {c: j for j, c in enumerate(self.classes_)}
        for i, row in enumerate(x):
            d = np.linalg.norm(self.x_ - row, axis=1)
            nearest = np.lexsort((np.arange(len(d)), d))[:k]
            for n in nearest:
                out[i, class_index[self.y_[n]]] += 1.0 / k
        return out

    def embed(self, x: np.ndarray) -> np.ndarray:
        return x


class _MultinomialLogit:
    """Softmax regression trained by full-batch gradient descent."""

    def __init__(self, cfg: ModelConfig) -> None:
        self.cfg = cfg

    def fit(self, x: np.ndarray, y: np.ndarray) -> None:
        self.classes_ = np.unique(y)
        n_classes = len(self.classes_)
        targets = np.searchsorted(self.classes_, y)
        rng = np.random.default_rng(self.cfg.seed)
        self.w_ = rng.normal(0.0, 0.01, size=(x.shape[1], n_classes))
        self.b_ = np.zeros(n_classes)
        onehot = np.eye(n_classes)[targets]
        for _ in range(self.cfg.epochs):
            p = self._softmax(x @ self.w_ + self.b_)
            err = (p - onehot) / len(x)
            self.w_ -= self.cfg.lr * (x.T @ err)
            self.b_ -= self.cfg.lr * err.sum(axis=0)

    @staticmethod
    def _softmax(logits: np.ndarray) -> np.ndarray:
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self._softmax(x @ self.w_ + self.b_)

    def embed(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w_ + self.b_


def make_model(cfg: ModelConfig):
    if cfg.kind == "nearest_centroid":
        return _NearestCentroid(cfg)
    if cfg.kind == "knn":
        return _KNN(cfg)
    return _MultinomialLogit(cfg)


def predict_labels(model, x: np.ndarray) -> np.ndarray:
    p = model.predict_proba(x)
    return model.classes_[np.argmax(p, axis=1)]


def max_entropy_select(model, x: np.ndarray, unlabeled: list[int], b: int) -> list[int]:
    """The b unlabeled items with the most uncertain predictions.

    Entropy ties resolve to the lower item id.
    """
    ids = np.array(sorted(unlabeled), dtype=np.intp)
    h = entropy_rows(model.predict_proba(x[ids]))
    order = np.lexsort((ids, -h))
    return [int(i) for i in ids[order[:b]]]


def k_center_select(
    rows: np.ndarray, labeled: list[int], unlabeled: list[int], b: int
) -> list[int]:
    """Greedy coverage: repeatedly add the unlabeled item farthest from every
    already-covered point (2-approximation of the optimal cover radius)."""
    if b == 0:
        return []
    if not labeled:
        raise ValueError("need at least one covered point to extend")
    pool = np.array(sorted(unlabeled), dtype=np.intp)
    centers = rows[np.array(sorted(labeled), dtype=np.intp)]
    d_min = np.min(
        np.linalg.norm(rows[pool][:, None, :] - centers[None, :, :], axis=2), axis=1
    )
    picked: list[int] = []
    available = np.ones(len(pool), dtype=bool)
    for _ in range(b):
        masked = np.where(available, d_min, -np.inf)
        choice = int(np.argmax(masked))
        picked.append(int(pool[choice]))
        available[choice] = False
        d_new = np.linalg.norm(rows[pool] - rows[pool[choice]], axis=1)
        d_min = np.minimum(d_min, d_new)
    return picked


@dataclass(frozen=True)
class ClassificationLoopConfig:
    batch_size: int = 10
    cycles: int = 5
    acquisition: str = "mi_clustered"
    query_length: int = 3
    model: ModelConfig = ModelConfig()
    mi_samples: int = 1000
    kmeans_cycles: int = 3  # k-means grouping early, majority-vote grouping after

    def __post_init__(self) -> None:
        if self.acquisition not in ACQUISITIONS:
            raise ValueError(f"unknown acquisition {self.acquisition!r}")


@dataclass
class ClassificationResult:
    accuracies: list[float]
    acquired: list[list[int]]


def al_classification_loop(
    features: np.ndarray,
    labels: np.ndarray,
    test_features: np.ndarray,
    test_labels: np.ndarray,
    initial_labeled: list[int],
    cfg: ClassificationLoopConfig,
    seed: int,
) -> ClassificationResult:
    """Run the acquisition loop and record held-out accuracy per cycle.

    Cycle 0 is the model trained on the initial labels; each later cycle
    adds one acquired batch (with ground-truth labels) and retrains from
    scratch, so the cycle-k model depends only on the labeled set and seed.
    """
    n = len(features)
    labeled = sorted(initial_labeled)
    unlabeled = sorted(set(range(n)) - set(labeled))
    accuracies: list[float] = []
    acquired_log: list[list[int]] = []

    def train_and_score() -> tuple[object, float]:
        model = make_model(cfg.model)
        model.fit(features[labeled], labels[labeled])
        acc = float(np.mean(predict_labels(model, test_features) == test_labels))
        return model, acc

    model, acc = train_and_score()
    accuracies.append(acc)
    for k in range(1, cfg.cycles + 1):
        if len(unlabeled) < cfg.batch_size:
            raise ValueError("unlabeled pool exhausted")
        batch = _acquire(model, features, labeled, labels, unlabeled, cfg, seed, k)
        acquired_log.append(batch)
        labeled = sorted(labeled + batch)
        unlabeled = sorted(set(unlabeled) - set(batch))
        model, acc = train_and_score()
        accuracies.append(acc)
    return ClassificationResult(accuracies, acquired_log)


def _acquire(
    model,
    features: np.ndarray,
    labeled: list[int],
    labels: np.ndarray,
    unlabeled: list[int],
    cfg: ClassificationLoopConfig,
    seed: int,
    cycle: int,
) -> list[int]:
    rows = model.embed(features)
    if cfg.acquisition == "random":
        rng = np.random.default_rng([seed, cycle])
        return [int(i) for i in rng.choice(sorted(unlabeled), cfg.batch_size, replace=False)]
    if cfg.acquisition == "max_entropy":
        return max_entropy_select(model, features, unlabeled, cfg.batch_size)
    if cfg.acquisition == "k_center":
        return k_center_select(rows, labeled, unlabeled, cfg.batch_size)
    # information-driven selection on the model's feature rows
    d = pairwise_distances(rows)
    iu = np.triu_indices(len(rows), k=1)
    mu = float(d[iu].max())
    sigma2 = float(np.var(d[iu]))
    mi_cfg = MIConfig(
        variant="distances",
        sigma2=sigma2,
        n_samples=cfg.mi_samples,
        seed=int(np.random.SeedSequence([seed, cycle]).generate_state(1)[0]),
    )
    clustering = "kmeans" if cycle <= cfg.kmeans_cycles else "knn_vote"
    labeled_pairs = [(int(i), int(labels[i])) for i in labeled]
    return select_batch_clustered(
        Embedding(rows),
        labeled_pairs,
        list(unlabeled),
        cfg.batch_size,
        cfg.query_length,
        mi_cfg,
        mu,
        clustering=clustering,
        cluster_seed=int(np.random.SeedSequence([seed, cycle, 7]).generate_state(1)[0]),
    )
