"""Six from-scratch binary classifiers over numeric feature matrices.

All of them consume float64 matrices X of shape (n, d) and integer
label vectors y in {0, 1}, and predict hard labels. Determinism rules:
every random choice flows from an explicit seed, prediction ties break
toward the smaller label, and KNN breaks distance ties toward the
smaller training index.

The discriminative kinds (logistic regression, linear SVM, decision
tree, random forest) refuse single-class training sets; Gaussian NB
and KNN degenerate gracefully to constant / majority behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ChainlensError

CLASSIFIER_KINDS = (
    "logistic_regression",
    "linear_svm",
    "decision_tree",
    "random_forest",
    "gaussian_nb",
    "knn",
)

KIND_DEFAULTS: dict[str, dict] = {
    "logistic_regression": {"learning_rate": 0.1, "iterations": 1000, "l2": 1e-4},
    "linear_svm": {"learning_rate": 0.1, "iterations": 1000, "l2": 1e-4},
    "decision_tree": {"min_samples_split": 2, "max_depth": None},
    "random_forest": {
        "n_trees": 100,
        "min_samples_split": 2,
        "max_depth": None,
        "bootstrap": True,
        "max_features": "sqrt",
    },
    "gaussian_nb": {"var_smoothing": 1e-9},
    "knn": {"k": 5},
}


def _validate_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ChainlensError("training features must be a nonempty 2-d matrix")
    if y.shape != (X.shape[0],):
        raise ChainlensError(
            f"labels shape {y.shape} does not match {X.shape[0]} rows"
        )
    if not np.all(np.isfinite(X)):
        raise ChainlensError("training features must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise ChainlensError("labels must be 0 or 1")
    return X, y.astype(np.int64)


def _require_both_classes(y, kind):
    if np.unique(y).shape[0] < 2:
        raise ChainlensError(
            f"{kind} needs both classes in the training set"
        )


def _validate_matrix(X, n_features):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ChainlensError("prediction input must be a 2-d matrix")
    if X.shape[0] and X.shape[1] != n_features:
        raise ChainlensError(
            f"expected {n_features} features, got {X.shape[1]}"
        )
    return X


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_and_gradient(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean log-loss with L2 penalty on the weights (bias unpenalized).

    ``params`` packs the weight vector followed by the bias, so the
    whole gradient is checkable against finite differences in one go.
    """
    params = np.asarray(params, dtype=np.float64)
    w = params[:-1]
    b = params[-1]
    z = X @ w + b
    # log(1 + exp(±z)) without overflow
    loss_terms = np.logaddexp(0.0, z) - y * z
    loss = float(loss_terms.mean()) + 0.5 * l2 * float(w @ w)
    residual = _sigmoid(z) - y
    grad_w = X.T @ residual / X.shape[0] + l2 * w
    grad_b = float(residual.mean())
    return loss, np.append(grad_w, grad_b)


@dataclass(frozen=True, eq=False)
class LogisticRegressionModel:
    weights: np.ndarray
    bias: float
    hyperparameters: dict

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _validate_matrix(X, self.weights.shape[0])
        return (X @ self.weights + self.bias >= 0.0).astype(np.int64)

    def parameters_doc(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias}


def fit_logistic_regression(X, y, hyperparameters) -> LogisticRegressionModel:
    X, y = _validate_xy(X, y)
    _require_both_classes(y, "logistic_regression")
    hp = hyperparameters
    params = np.zeros(X.shape[1] + 1, dtype=np.float64)
    for _ in range(hp["iterations"]):
        _, grad = logistic_loss_and_gradient(params, X, y, hp["l2"])
        params -= hp["learning_rate"] * grad
    return LogisticRegressionModel(
        weights=params[:-1], bias=float(params[-1]), hyperparameters=dict(hp)
    )


@dataclass(frozen=True, eq=False)
class LinearSVMModel:
    weights: np.ndarray
    bias: float
    hyperparameters: dict

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _validate_matrix(X, self.weights.shape[0])
        return (X @ self.weights + self.bias >= 0.0).astype(np.int64)

    def parameters_doc(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias}


def fit_linear_svm(X, y, hyperparameters) -> LinearSVMModel:
    # full-batch subgradient descent on mean hinge loss + L2
    X, y = _validate_xy(X, y)
    _require_both_classes(y, "linear_svm")
    hp = hyperparameters
    signs = np.where(y == 1, 1.0, -1.0)
    w = np.zeros(X.shape[1], dtype=np.float64)
    b = 0.0
    n = X.shape[0]
    for _ in range(hp["iterations"]):
        margins = signs * (X @ w + b)
        violating = margins < 1.0
        grad_w = hp["l2"] * w - (signs[violating] @ X[violating]) / n
        grad_b = -float(signs[violating].sum()) / n
        w -= hp["learning_rate"] * grad_w
        b -= hp["learning_rate"] * grad_b
    return LinearSVMModel(weights=w, bias=float(b), hyperparameters=dict(hp))


def _gini_pair(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    # binary Gini impurity from positive counts, vectorized over splits
    p = pos / total
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _best_split(X, y, feature_indices):
    """Lowest weighted child Gini over midpoint thresholds.

    Ties break toward the earlier feature, then the smaller threshold.
    Returns (feature, threshold) or None when no split separates rows.
    """
    n = y.shape[0]
    best = None
    for f in feature_indices:
        values = X[:, f]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        sy = y[order]
        boundary = np.flatnonzero(sv[1:] != sv[:-1])
        if boundary.size == 0:
            continue
        pos_prefix = np.cumsum(sy)
        left_n = (boundary + 1).astype(np.float64)
        right_n = n - left_n
        left_pos = pos_prefix[boundary].astype(np.float64)
        right_pos = float(pos_prefix[-1]) - left_pos
        weighted = (
            left_n * _gini_pair(left_pos, left_n)
            + right_n * _gini_pair(right_pos, right_n)
        ) / n
        j = int(np.argmin(weighted))
        score = float(weighted[j])
        if best is None or score < best[0]:
            cut = boundary[j]
            best = (score, f, (sv[cut] + sv[cut + 1]) / 2.0)
    if best is None:
        return None
    return best[1], best[2], best[0]


def _majority_label(y: np.ndarray) -> int:
    counts = np.bincount(y, minlength=2)
    # argmax on a tie returns the first index, i.e. the smaller label
    return int(np.argmax(counts))


def _build_tree(X, y, min_samples_split, max_depth, max_features, rng):
    """CART with Gini impurity, grown iteratively (no recursion cap).

    Nodes are parallel arrays: feature == -1 marks a leaf. A node with
    ``max_features`` below the dimensionality draws a fresh feature
    subset per split, which is what the forest passes in.
    """
    n, d = X.shape
    feature, threshold = [], []
    left, right, label = [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        label.append(0)
        return len(feature) - 1

    root = new_node()
    stack = [(np.arange(n), root, 0)]
    while stack:
        idx, node, depth = stack.pop()
        ys = y[idx]
        counts = np.bincount(ys, minlength=2)
        pure = counts[0] == 0 or counts[1] == 0
        stop = (
            pure
            or idx.shape[0] < min_samples_split
            or (max_depth is not None and depth >= max_depth)
        )
        split = None
        if not stop:
            if max_features is None or max_features >= d:
                candidates = range(d)
            else:
                candidates = rng.choice(d, size=max_features, replace=False)
            split = _best_split(X[idx], ys, candidates)
            if split is not None:
                p = counts[1] / idx.shape[0]
                parent_gini = 1.0 - p * p - (1.0 - p) * (1.0 - p)
                # demand a real impurity decrease, not float noise
                if split[2] > parent_gini - 1e-12:
                    split = None
        if split is None:
            label[node] = _majority_label(ys)
            continue
        f, thr, _ = split
        mask = X[idx, f] <= thr
        left_id = new_node()
        right_id = new_node()
        feature[node] = int(f)
        threshold[node] = float(thr)
        left[node] = left_id
        right[node] = right_id
        stack.append((idx[mask], left_id, depth + 1))
        stack.append((idx[~mask], right_id, depth + 1))
    return {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=np.float64),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "label": np.array(label, dtype=np.int64),
    }


def _tree_predict(tree: dict, X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    pending = np.flatnonzero(tree["feature"][node] >= 0)
    while pending.size:
        cur = node[pending]
        f = tree["feature"][cur]
        go_left = X[pending, f] <= tree["threshold"][cur]
        node[pending] = np.where(go_left, tree["left"][cur], tree["right"][cur])
        pending = pending[tree["feature"][node[pending]] >= 0]
    return tree["label"][node]


def _tree_doc(tree: dict) -> dict:
    return {name: arr.tolist() for name, arr in tree.items()}


def _tree_from_doc(doc: dict) -> dict:
    return {
        "feature": np.array(doc["feature"], dtype=np.int64),
        "threshold": np.array(doc["threshold"], dtype=np.float64),
        "left": np.array(doc["left"], dtype=np.int64),
        "right": np.array(doc["right"], dtype=np.int64),
        "label": np.array(doc["label"], dtype=np.int64),
    }


@dataclass(frozen=True, eq=False)
class DecisionTreeModel:
    tree: dict
    n_features: int
    hyperparameters: dict

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _validate_matrix(X, self.n_features)
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        return _tree_predict(self.tree, X)

    def parameters_doc(self) -> dict:
        return {"n_features": self.n_features, "tree": _tree_doc(self.tree)}


def fit_decision_tree(X, y, hyperparameters) -> DecisionTreeModel:
    X, y = _validate_xy(X, y)
    _require_both_classes(y, "decision_tree")
    hp = hyperparameters
    tree = _build_tree(
        X,
        y,
        min_samples_split=hp["min_samples_split"],
        max_depth=hp["max_depth"],
        max_features=None,
        rng=None,
    )
    return DecisionTreeModel(
        tree=tree, n_features=X.shape[1], hyperparameters=dict(hp)
    )


@dataclass(frozen=True, eq=False)
class RandomForestModel:
    trees: tuple
    n_features: int
    hyperparameters: dict

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _validate_matrix(X, self.n_features)
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        votes = np.zeros(X.shape[0], dtype=np.int64)
        for tree in self.trees:
            votes += _tree_predict(tree, X)
        # strict majority; an exact tie goes to label 0
        return (votes * 2 > len(self.trees)).astype(np.int64)

    def parameters_doc(self) -> dict:
        return {
            "n_features": self.n_features,
            "trees": [_tree_doc(t) for t in self.trees],
        }


def _forest_max_features(setting, d: int) -> int | None:
    if setting == "sqrt":
        return max(1, int(math.isqrt(d)))
    if setting == "all" or setting is None:
        return None
    return int(setting)


def fit_random_forest(X, y, hyperparameters, seed: int = 0) -> RandomForestModel:
    X, y = _validate_xy(X, y)
    _require_both_classes(y, "random_forest")
    hp = hyperparameters
    max_features = _forest_max_features(hp["max_features"], X.shape[1])
    trees = []
    for t in range(hp["n_trees"]):
        rng = np.random.default_rng([seed, t])
        if hp["bootstrap"]:
            idx = rng.integers(0, X.shape[0], size=X.shape[0])
            Xt, yt = X[idx], y[idx]
        else:
            Xt, yt = X, y
        trees.append(
            _build_tree(
                Xt,
                yt,
                min_samples_split=hp["min_samples_split"],
                max_depth=hp["max_depth"],
                max_features=max_features,
                rng=rng,
            )
        )
    return RandomForestModel(
        trees=tuple(trees), n_features=X.shape[1], hyperparameters=dict(hp)
    )


@dataclass(frozen=True, eq=False)
class GaussianNBModel:
    classes: np.ndarray
    priors: np.ndarray
    means: np.ndarray  # (n_classes, d)
    variances: np.ndarray  # (n_classes, d), smoothed
    hyperparameters: dict

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _validate_matrix(X, self.means.shape[1])
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        scores = np.empty((X.shape[0], self.classes.shape[0]), dtype=np.float64)
        for c in range(self.classes.shape[0]):
            diff = X - self.means[c]
            log_like = -0.5 * np.sum(
                np.log(2.0 * np.pi * self.variances[c]) + diff * diff / self.variances[c],
                axis=1,
            )
            scores[:, c] = math.log(self.priors[c]) + log_like
        # argmax ties resolve to the first (smaller) class label
        return self.classes[np.argmax(scores, axis=1)]

    def parameters_doc(self) -> dict:
        return {
            "classes": self.classes.tolist(),
            "priors": self.priors.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }


def fit_gaussian_nb(X, y, hyperparameters) -> GaussianNBModel:
    X, y = _validate_xy(X, y)
    hp = hyperparameters
    classes = np.unique(y)
    # smoothing floor keyed to the largest feature variance, so scale
    # invariance of the decision rule is preserved
    smoothing = hp["var_smoothing"] * float(np.max(X.var(axis=0), initial=0.0))
    priors = np.empty(classes.shape[0])
    means = np.empty((classes.shape[0], X.shape[1]))
    variances = np.empty_like(means)
    for c, cls in enumerate(classes):
        rows = X[y == cls]
        priors[c] = rows.shape[0] / X.shape[0]
        means[c] = rows.mean(axis=0)
        variances[c] = rows.var(axis=0) + smoothing
    if np.any(variances <= 0):
        variances = variances + 1e-300  # fully degenerate training data
    return GaussianNBModel(
        classes=classes.astype(np.int64),
        priors=priors,
        means=means,
        variances=variances,
        hyperparameters=dict(hp),
    )


@dataclass(frozen=True, eq=False)
class KNNModel:
    train_X: np.ndarray
    train_y: np.ndarray
    hyperparameters: dict

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _validate_matrix(X, self.train_X.shape[1])
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        k = min(self.hyperparameters["k"], self.train_X.shape[0])
        out = np.empty(X.shape[0], dtype=np.int64)
        # chunked to bound the n_test x n_train distance block
        chunk = max(1, int(2_000_000 // max(1, self.train_X.shape[0])))
        for start in range(0, X.shape[0], chunk):
            block = X[start : start + chunk]
            d2 = (
                (block * block).sum(axis=1)[:, None]
                - 2.0 * block @ self.train_X.T
                + (self.train_X * self.train_X).sum(axis=1)[None, :]
            )
            # stable sort: equal distances keep training-index order
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
            votes = self.train_y[nearest].sum(axis=1)
            # majority of k; exact tie goes to the smaller label
            out[start : start + chunk] = (votes * 2 > k).astype(np.int64)
        return out

    def parameters_doc(self) -> dict:
        return {
            "train_X": self.train_X.tolist(),
            "train_y": self.train_y.tolist(),
        }


def fit_knn(X, y, hyperparameters) -> KNNModel:
    X, y = _validate_xy(X, y)
    return KNNModel(train_X=X, train_y=y, hyperparameters=dict(hyperparameters))


_FITTERS = {
    "logistic_regression": lambda X, y, hp, seed: fit_logistic_regression(X, y, hp),
    "linear_svm": lambda X, y, hp, seed: fit_linear_svm(X, y, hp),
    "decision_tree": lambda X, y, hp, seed: fit_decision_tree(X, y, hp),
    "random_forest": fit_random_forest,
    "gaussian_nb": lambda X, y, hp, seed: fit_gaussian_nb(X, y, hp),
    "knn": lambda X, y, hp, seed: fit_knn(X, y, hp),
}

_MODEL_CLASSES = {
    "logistic_regression": LogisticRegressionModel,
    "linear_svm": LinearSVMModel,
    "decision_tree": DecisionTreeModel,
    "random_forest": RandomForestModel,
    "gaussian_nb": GaussianNBModel,
    "knn": KNNModel,
}


def resolve_hyperparameters(kind: str, overrides: dict | None = None) -> dict:
    if kind not in KIND_DEFAULTS:
        raise ChainlensError(
            f"unknown classifier kind {kind!r}; expected one of {CLASSIFIER_KINDS}"
        )
    hp = dict(KIND_DEFAULTS[kind])
    for name, value in (overrides or {}).items():
        if name not in hp:
            raise ChainlensError(
                f"{kind} has no hyperparameter {name!r}; valid: {sorted(hp)}"
            )
        hp[name] = value
    return hp


def fit_classifier(kind: str, X, y, hyperparameters: dict | None = None, seed: int = 0):
    hp = resolve_hyperparameters(kind, hyperparameters)
    return _FITTERS[kind](X, y, hp, seed)


def model_parameters_from_doc(kind: str, doc: dict, hyperparameters: dict):
    """Rebuild a model object from its JSON parameter document."""
    if kind == "logistic_regression":
        return LogisticRegressionModel(
            weights=np.array(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
            hyperparameters=hyperparameters,
        )
    if kind == "linear_svm":
        return LinearSVMModel(
            weights=np.array(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
            hyperparameters=hyperparameters,
        )
    if kind == "decision_tree":
        return DecisionTreeModel(
            tree=_tree_from_doc(doc["tree"]),
            n_features=int(doc["n_features"]),
            hyperparameters=hyperparameters,
        )
    if kind == "random_forest":
        return RandomForestModel(
            trees=tuple(_tree_from_doc(t) for t in doc["trees"]),
            n_features=int(doc["n_features"]),
            hyperparameters=hyperparameters,
        )
    if kind == "gaussian_nb":
        return GaussianNBModel(
            classes=np.array(doc["classes"], dtype=np.int64),
            priors=np.array(doc["priors"], dtype=np.float64),
            means=np.array(doc["means"], dtype=np.float64),
            variances=np.array(doc["variances"], dtype=np.float64),
            hyperparameters=hyperparameters,
        )
    if kind == "knn":
        return KNNModel(
            train_X=np.array(doc["train_X"], dtype=np.float64),
            train_y=np.array(doc["train_y"], dtype=np.int64),
            hyperparameters=hyperparameters,
        )
    raise ChainlensError(f"unknown classifier kind {kind!r}")
