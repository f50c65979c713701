import numpy as np
import pytest

from nnquery.classify import (
    ClassificationLoopConfig,
    ModelConfig,
    al_classification_loop,
    k_center_select,
    make_model,
    max_entropy_select,
    predict_labels,
)
from nnquery.choice import entropy
from nnquery.datasets import gaussian_blobs


def blob_data(seed=0, n=120, n_test=120, std=1.0):
    centers = np.array([[3.0, 0.0], [-3.0, 0.0], [0.0, 3.0], [0.0, -3.0]])
    rng = np.random.default_rng(seed)
    x, y = gaussian_blobs(n, centers, std, rng)
    x_test, y_test = gaussian_blobs(n_test, centers, std, rng)
    return x, y, x_test, y_test


class TestModels:
    @pytest.mark.parametrize("kind", ["nearest_centroid", "knn", "multinomial_logit"])
    def test_predict_proba_is_simplex(self, kind):
        x, y, x_test, _ = blob_data()
        model = make_model(ModelConfig(kind=kind))
        model.fit(x, y)
        p = model.predict_proba(x_test)
        assert p.shape == (len(x_test), 4)
        assert np.all(p >= -1e-12)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)

    @pytest.mark.parametrize("kind", ["nearest_centroid", "knn", "multinomial_logit"])
    def test_separable_blobs_learned(self, kind):
        x, y, x_test, y_test = blob_data(std=0.4)
        model = make_model(ModelConfig(kind=kind))
        model.fit(x, y)
        acc = np.mean(predict_labels(model, x_test) == y_test)
        assert acc > 0.95

    def test_logit_training_deterministic(self):
        x, y, x_test, _ = blob_data()
        cfg = ModelConfig(kind="multinomial_logit", seed=5)
        m1, m2 = make_model(cfg), make_model(cfg)
        m1.fit(x, y)
        m2.fit(x, y)
        np.testing.assert_array_equal(m1.predict_proba(x_test), m2.predict_proba(x_test))

    def test_logit_embed_is_logits(self):
        x, y, *_ = blob_data()
        model = make_model(ModelConfig(kind="multinomial_logit"))
        model.fit(x, y)
        rows = model.embed(x)
        assert rows.shape == (len(x), 4)


class TestMaxEntropy:
    def test_picks_uncertain_items(self):
        class Stub:
            def predict_proba(self, x):
                # items with feature 0 -> uncertain, feature 1 -> confident
                return np.where(x[:, :1] == 0, 0.5, 0.9) * np.ones((len(x), 1)) * [
                    1.0,
                    0.0,
                ] + np.where(x[:, :1] == 0, 0.5, 0.1) * np.ones((len(x), 1)) * [0.0, 1.0]

        x = np.array([[1.0], [0.0], [1.0], [0.0]])
        picked = max_entropy_select(Stub(), x, [0, 1, 2, 3], 2)
        assert set(picked) == {1, 3}

    def test_b_equals_pool_returns_all(self):
        class Uniform:
            def predict_proba(self, x):
                return np.full((len(x), 3), 1 / 3)

        picked = max_entropy_select(Uniform(), np.zeros((5, 2)), [4, 2, 0], 3)
        assert set(picked) == {0, 2, 4}

    def test_agrees_with_entropy_sort(self):
        rng = np.random.default_rng(3)
        probs = rng.dirichlet(np.ones(4), size=20)

        class Fixed:
            def predict_proba(self, x):
                return probs[x[:, 0].astype(int)]

        x = np.arange(20, dtype=float)[:, None]
        picked = max_entropy_select(Fixed(), x, list(range(20)), 6)
        ent = np.array([entropy(p) for p in probs])
        expected = np.lexsort((np.arange(20), -ent))[:6]
        assert picked == [int(i) for i in expected]


class TestKCenter:
    def test_line_picks_farthest_endpoint(self):
        rows = np.array([[0.0], [1.0], [2.0], [7.0]])
        picked = k_center_select(rows, labeled=[0], unlabeled=[1, 2, 3], b=1)
        assert picked == [3]

    def test_b_zero_empty(self):
        rows = np.zeros((3, 2))
        assert k_center_select(rows, [0], [1, 2], 0) == []

    def test_greedy_within_twice_optimum(self):
        rng = np.random.default_rng(7)
        for trial in range(5):
            rows = rng.uniform(0, 10, size=(10, 2))
            labeled = [0]
            unlabeled = list(range(1, 10))
            b = 3
            picked = k_center_select(rows, labeled, unlabeled, b)

            def cover_radius(centers):
                d = np.linalg.norm(rows[:, None, :] - rows[centers][None, :, :], axis=2)
                return d.min(axis=1).max()

            greedy_radius = cover_radius(labeled + picked)
            import itertools

            best = min(
                cover_radius(labeled + list(combo))
                for combo in itertools.combinations(unlabeled, b)
            )
            assert greedy_radius <= 2 * best + 1e-9


class TestLoop:
    def test_full_pool_single_cycle_matches_full_data_model(self):
        x, y, x_test, y_test = blob_data(seed=1)
        initial = list(range(0, 120, 6))
        cfg = ClassificationLoopConfig(
            batch_size=len(x) - len(initial),
            cycles=1,
            acquisition="random",
            model=ModelConfig(kind="multinomial_logit", seed=3),
        )
        result = al_classification_loop(x, y, x_test, y_test, initial, cfg, seed=0)
        model = make_model(ModelConfig(kind="multinomial_logit", seed=3))
        model.fit(x, y)
        full_acc = np.mean(predict_labels(model, x_test) == y_test)
        assert result.accuracies[-1] == pytest.approx(full_acc)

    def test_random_acquisition_reproducible(self):
        x, y, x_test, y_test = blob_data(seed=2)
        initial = list(range(0, 120, 10))
        cfg = ClassificationLoopConfig(batch_size=5, cycles=3, acquisition="random")
        r1 = al_classification_loop(x, y, x_test, y_test, initial, cfg, seed=9)
        r2 = al_classification_loop(x, y, x_test, y_test, initial, cfg, seed=9)
        assert r1.acquired == r2.acquired
        assert r1.accuracies == r2.accuracies

    @pytest.mark.parametrize("acq", ["mi_clustered", "max_entropy", "random", "k_center"])
    def test_partition_invariants(self, acq):
        x, y, x_test, y_test = blob_data(seed=3)
        initial = [0, 1, 2, 3, 4, 5, 6, 7]
        cfg = ClassificationLoopConfig(
            batch_size=6, cycles=2, acquisition=acq, mi_samples=64,
            model=ModelConfig(kind="nearest_centroid"),
        )
        result = al_classification_loop(x, y, x_test, y_test, initial, cfg, seed=4)
        acquired_flat = [i for batch in result.acquired for i in batch]
        assert len(acquired_flat) == 12
        assert len(set(acquired_flat)) == 12
        assert not set(acquired_flat) & set(initial)
        assert len(result.accuracies) == 3

    def test_acquired_labels_are_ground_truth(self):
        # the loop never invents labels: retraining on L_k replays exactly
        x, y, x_test, y_test = blob_data(seed=4)
        initial = list(range(8))
        cfg = ClassificationLoopConfig(
            batch_size=4, cycles=2, acquisition="max_entropy",
            model=ModelConfig(kind="knn"),
        )
        result = al_classification_loop(x, y, x_test, y_test, initial, cfg, seed=5)
        labeled = sorted(initial + [i for b in result.acquired for i in b])
        model = make_model(ModelConfig(kind="knn"))
        model.fit(x[labeled], y[labeled])
        acc = np.mean(predict_labels(model, x_test) == y_test)
        assert acc == pytest.approx(result.accuracies[-1])

    def test_pool_exhaustion_rejected(self):
        x, y, x_test, y_test = blob_data(seed=5)
        initial = list(range(110))
        cfg = ClassificationLoopConfig(batch_size=20, cycles=1, acquisition="random")
        with pytest.raises(ValueError):
            al_classification_loop(x, y, x_test, y_test, initial, cfg, seed=0)
