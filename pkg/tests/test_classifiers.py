"""Algorithm-level checks for the six classifiers."""

import numpy as np
import pytest

from chainlens.classifiers import (
    KIND_DEFAULTS,
    fit_classifier,
    fit_decision_tree,
    fit_gaussian_nb,
    fit_knn,
    fit_random_forest,
    logistic_loss_and_gradient,
    resolve_hyperparameters,
)
from chainlens.errors import ChainlensError


def two_blobs(rng, n_per=60, separation=6.0, d=4):
    a = rng.normal(loc=0.0, size=(n_per, d))
    b = rng.normal(loc=separation, size=(n_per, d))
    X = np.vstack([a, b])
    y = np.array([0] * n_per + [1] * n_per)
    return X, y


def central_difference_gradient(params, X, y, l2, h=1e-6):
    grad = np.empty_like(params)
    for i in range(params.shape[0]):
        plus = params.copy()
        minus = params.copy()
        plus[i] += h
        minus[i] -= h
        loss_plus, _ = logistic_loss_and_gradient(plus, X, y, l2)
        loss_minus, _ = logistic_loss_and_gradient(minus, X, y, l2)
        grad[i] = (loss_plus - loss_minus) / (2.0 * h)
    return grad


class TestLogisticRegression:
    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(2, 20))
            d = int(rng.integers(1, 7))
            X = rng.normal(size=(n, d))
            y = rng.integers(0, 2, size=n)
            params = rng.normal(size=d + 1)
            _, analytic = logistic_loss_and_gradient(params, X, y, 1e-4)
            numeric = central_difference_gradient(params, X, y, 1e-4)
            denom = max(np.linalg.norm(analytic), 1e-12)
            assert np.linalg.norm(analytic - numeric) / denom <= 1e-6

    def test_learns_separable_blobs(self):
        rng = np.random.default_rng(2)
        X, y = two_blobs(rng)
        model = fit_classifier("logistic_regression", X, y)
        assert np.mean(model.predict(X) == y) >= 0.99

    def test_single_class_rejected(self):
        X = np.zeros((5, 2))
        with pytest.raises(ChainlensError):
            fit_classifier("logistic_regression", X, np.ones(5, dtype=int))


class TestLinearSVM:
    def test_learns_separable_blobs(self):
        rng = np.random.default_rng(3)
        X, y = two_blobs(rng)
        model = fit_classifier("linear_svm", X, y)
        assert np.mean(model.predict(X) == y) >= 0.99

    def test_single_class_rejected(self):
        with pytest.raises(ChainlensError):
            fit_classifier("linear_svm", np.zeros((4, 2)), np.zeros(4, dtype=int))

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        X, y = two_blobs(rng, n_per=30)
        a = fit_classifier("linear_svm", X, y)
        b = fit_classifier("linear_svm", X, y)
        assert np.array_equal(a.weights, b.weights)
        assert a.bias == b.bias


class TestDecisionTree:
    def test_single_split_on_1d_separable(self):
        X = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 0, 1, 1, 1])
        model = fit_decision_tree(X, y, KIND_DEFAULTS["decision_tree"])
        assert np.array_equal(model.predict(X), y)
        # one internal node splitting at the midpoint of -1 and 1
        internal = model.tree["feature"] >= 0
        assert internal.sum() == 1
        assert model.tree["threshold"][internal][0] == 0.0

    def test_grows_two_levels_when_first_split_gains(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]])
        y = np.array([0, 0, 1, 1, 0, 0])
        model = fit_decision_tree(X, y, KIND_DEFAULTS["decision_tree"])
        assert np.array_equal(model.predict(X), y)
        assert (model.tree["feature"] >= 0).sum() == 2

    def test_zero_gain_split_becomes_majority_leaf(self):
        # XOR: no single axis split lowers Gini, so the root stays a leaf
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        model = fit_decision_tree(X, y, KIND_DEFAULTS["decision_tree"])
        assert np.all(model.tree["feature"] == -1)
        assert np.array_equal(model.predict(X), np.zeros(4, dtype=int))

    def test_min_samples_split_stops_growth(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 1, 0, 1])
        hp = dict(KIND_DEFAULTS["decision_tree"], min_samples_split=10)
        model = fit_decision_tree(X, y, hp)
        assert np.all(model.tree["feature"] == -1)  # a single leaf
        # majority tie between the classes resolves to label 0
        assert np.array_equal(model.predict(X), np.zeros(4, dtype=int))

    def test_max_depth_cap(self):
        # y = 1 on the middle band; depth 1 allows only the first cut
        rng = np.random.default_rng(5)
        X = rng.uniform(-3.0, 3.0, size=(200, 1))
        y = (np.abs(X[:, 0]) < 1.0).astype(int)
        stump = fit_decision_tree(X, y, dict(KIND_DEFAULTS["decision_tree"], max_depth=1))
        assert (stump.tree["feature"] >= 0).sum() == 1
        assert np.mean(stump.predict(X) == y) < 1.0
        full = fit_decision_tree(X, y, KIND_DEFAULTS["decision_tree"])
        assert np.array_equal(full.predict(X), y)

    def test_single_class_rejected(self):
        with pytest.raises(ChainlensError):
            fit_decision_tree(np.zeros((4, 2)), np.ones(4, dtype=int), KIND_DEFAULTS["decision_tree"])

    def test_duplicate_feature_rows_fall_back_to_majority(self):
        X = np.array([[1.0], [1.0], [1.0]])
        y = np.array([0, 1, 1])
        model = fit_decision_tree(X, y, KIND_DEFAULTS["decision_tree"])
        assert np.array_equal(model.predict(X), np.array([1, 1, 1]))


class TestRandomForest:
    def test_degenerates_to_single_tree(self):
        rng = np.random.default_rng(6)
        X, y = two_blobs(rng, n_per=40, separation=3.0)
        hp = dict(
            KIND_DEFAULTS["random_forest"],
            n_trees=1,
            bootstrap=False,
            max_features="all",
        )
        forest = fit_random_forest(X, y, hp, seed=0)
        tree = fit_decision_tree(X, y, KIND_DEFAULTS["decision_tree"])
        probe = rng.normal(loc=1.5, size=(300, X.shape[1]))
        assert np.array_equal(forest.predict(probe), tree.predict(probe))

    def test_learns_blobs(self):
        rng = np.random.default_rng(7)
        X, y = two_blobs(rng, n_per=50, separation=4.0)
        hp = dict(KIND_DEFAULTS["random_forest"], n_trees=15)
        model = fit_random_forest(X, y, hp, seed=1)
        assert np.mean(model.predict(X) == y) >= 0.99

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(8)
        X, y = two_blobs(rng, n_per=25, separation=2.0)
        hp = dict(KIND_DEFAULTS["random_forest"], n_trees=7)
        probe = rng.normal(size=(50, X.shape[1]))
        a = fit_random_forest(X, y, hp, seed=5).predict(probe)
        b = fit_random_forest(X, y, hp, seed=5).predict(probe)
        assert np.array_equal(a, b)

    def test_single_class_rejected(self):
        with pytest.raises(ChainlensError):
            fit_random_forest(
                np.zeros((4, 2)), np.zeros(4, dtype=int), KIND_DEFAULTS["random_forest"]
            )


class TestGaussianNB:
    def test_boundary_at_midpoint_of_symmetric_classes(self):
        rng = np.random.default_rng(9)
        X = np.concatenate([rng.normal(-3.0, 1.0, 500), rng.normal(3.0, 1.0, 500)])
        y = np.array([0] * 500 + [1] * 500)
        model = fit_gaussian_nb(X.reshape(-1, 1), y, KIND_DEFAULTS["gaussian_nb"])
        grid = np.linspace(-1.0, 1.0, 2001).reshape(-1, 1)
        predictions = model.predict(grid)
        switches = np.flatnonzero(np.diff(predictions) != 0)
        assert switches.size == 1
        boundary = float(grid[switches[0], 0])
        assert abs(boundary) <= 0.1

    def test_single_class_degrades_to_constant(self):
        X = np.random.default_rng(10).normal(size=(10, 3))
        model = fit_gaussian_nb(X, np.ones(10, dtype=int), KIND_DEFAULTS["gaussian_nb"])
        assert np.array_equal(model.predict(X), np.ones(10, dtype=int))

    def test_constant_features_do_not_crash(self):
        X = np.ones((8, 2))
        y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        model = fit_gaussian_nb(X, y, KIND_DEFAULTS["gaussian_nb"])
        out = model.predict(np.ones((3, 2)))
        assert out.shape == (3,)


class TestKNN:
    def test_k1_recovers_training_labels(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(30, 4))
        y = rng.integers(0, 2, size=30)
        model = fit_knn(X, y, {"k": 1})
        assert np.array_equal(model.predict(X), y)

    def test_k2_tie_goes_to_smaller_label(self):
        X = np.array([[0.0], [2.0]])
        y = np.array([0, 1])
        model = fit_knn(X, y, {"k": 2})
        assert model.predict(np.array([[1.0]]))[0] == 0

    def test_distance_tie_goes_to_smaller_training_index(self):
        # both training points at distance 1; k=1 must take index 0
        X = np.array([[1.0], [-1.0]])
        y = np.array([1, 0])
        model = fit_knn(X, y, {"k": 1})
        assert model.predict(np.array([[0.0]]))[0] == 1

    def test_k_equals_n_predicts_majority(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(9, 2))
        y = np.array([1, 1, 1, 1, 1, 0, 0, 0, 0])
        model = fit_knn(X, y, {"k": 9})
        probe = rng.normal(size=(20, 2))
        assert np.array_equal(model.predict(probe), np.ones(20, dtype=int))

    def test_single_class_degrades_gracefully(self):
        X = np.zeros((4, 2))
        model = fit_knn(X, np.zeros(4, dtype=int), {"k": 5})
        assert np.array_equal(model.predict(np.ones((2, 2))), np.zeros(2, dtype=int))


class TestCommonBehavior:
    @pytest.mark.parametrize("kind", sorted(KIND_DEFAULTS))
    def test_empty_prediction_input(self, kind):
        rng = np.random.default_rng(13)
        X, y = two_blobs(rng, n_per=15, separation=3.0, d=3)
        hp = {"n_trees": 3} if kind == "random_forest" else None
        model = fit_classifier(kind, X, y, hyperparameters=hp)
        out = model.predict(np.empty((0, 3)))
        assert out.shape == (0,)

    @pytest.mark.parametrize("kind", sorted(KIND_DEFAULTS))
    def test_dimension_mismatch_rejected(self, kind):
        rng = np.random.default_rng(14)
        X, y = two_blobs(rng, n_per=15, separation=3.0, d=3)
        hp = {"n_trees": 3} if kind == "random_forest" else None
        model = fit_classifier(kind, X, y, hyperparameters=hp)
        with pytest.raises(ChainlensError):
            model.predict(np.zeros((2, 5)))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ChainlensError):
            resolve_hyperparameters("perceptron")

    def test_unknown_hyperparameter_rejected(self):
        with pytest.raises(ChainlensError):
            resolve_hyperparameters("knn", {"neighbors": 3})

    def test_overrides_apply(self):
        hp = resolve_hyperparameters("knn", {"k": 9})
        assert hp == {"k": 9}

    def test_bad_labels_rejected(self):
        with pytest.raises(ChainlensError):
            fit_classifier("knn", np.zeros((3, 1)), np.array([0, 1, 2]))

    def test_nonfinite_features_rejected(self):
        with pytest.raises(ChainlensError):
            fit_classifier("knn", np.array([[np.nan]]), np.array([0]))
