"""Tree-based regressors and classifiers built from scratch.

Regression trees use CART variance-reduction splits with midpoint
thresholds and mean-valued leaves; classification trees use Gini impurity
with count-valued leaves.  Ensembles (bagging, random forest, gradient
boosting, forest classifier) derive one seed per tree from the spec seed,
so fits are deterministic and independent of scheduling.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .dataset import Dataset, derive_seed

KIND_DT = "DT"
KIND_BAGGING = "BG"
KIND_RF = "RF"
KIND_GBT = "GBT"
KIND_DT_CLF = "DT_CLF"
KIND_RF_CLF = "RF_CLF"

REGRESSOR_KINDS = (KIND_BAGGING, KIND_DT, KIND_GBT, KIND_RF)
CLASSIFIER_KINDS = (KIND_DT_CLF, KIND_RF_CLF)

_MODEL_FORMAT = "imbrec-model"
_MODEL_VERSION = 1


@dataclass(frozen=True)
class LearnerSpec:
    """Learner kind plus hyperparameters.

    ``feature_subsample`` of "sqrt" draws ceil(sqrt(d)) candidate features
    per split; None considers all features.  ``learning_rate`` only applies
    to boosting.
    """

    kind: str
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 5
    feature_subsample: str | int | None = None
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in REGRESSOR_KINDS + CLASSIFIER_KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be at least 1 (or None for unlimited)")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")


def default_spec(kind: str, seed: int = 0) -> LearnerSpec:
    """Conventional defaults per kind."""
    if kind == KIND_DT:
        return LearnerSpec(kind, n_trees=1, seed=seed)
    if kind == KIND_BAGGING:
        return LearnerSpec(kind, n_trees=100, seed=seed)
    if kind == KIND_RF:
        return LearnerSpec(kind, n_trees=100, feature_subsample="sqrt", seed=seed)
    if kind == KIND_GBT:
        return LearnerSpec(kind, n_trees=100, max_depth=3, learning_rate=0.1, seed=seed)
    if kind == KIND_DT_CLF:
        return LearnerSpec(kind, n_trees=1, min_leaf=1, seed=seed)
    if kind == KIND_RF_CLF:
        return LearnerSpec(
            kind, n_trees=500, min_leaf=1, feature_subsample="sqrt", seed=seed
        )
    raise ValueError(f"unknown learner kind {kind!r}")


def _subsample_size(rule: str | int | None, d: int) -> int:
    if rule is None:
        return d
    if rule == "sqrt":
        return min(d, math.ceil(math.sqrt(d)))
    size = int(rule)
    if not 1 <= size <= d:
        raise ValueError(f"feature_subsample {rule!r} out of range for d={d}")
    return size


class _Tree:
    """Flat-array binary tree; node 0 is the root, feature -1 marks leaves."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "n_samples", "impurity")

    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list = []
        self.n_samples: list[int] = []
        self.impurity: list[float] = []

    def add_node(self, value, n_samples: int, impurity: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.n_samples.append(n_samples)
        self.impurity.append(impurity)
        return len(self.feature) - 1

    def finalize(self) -> None:
        self.feature = np.asarray(self.feature, dtype=np.intp)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.intp)
        self.right = np.asarray(self.right, dtype=np.intp)

    def leaf_ids(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.intp)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            rows = np.flatnonzero(active)
            go_left = x[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])


def _best_split_sse(
    x: np.ndarray, y: np.ndarray, idx: np.ndarray, features: np.ndarray, min_leaf: int
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, total child SSE) for a regression node.

    Scans candidate features in ascending index order; within a feature,
    thresholds are midpoints between consecutive distinct values.  Ties keep
    the earliest candidate, making fits deterministic.
    """
    n = len(idx)
    best: tuple[int, float, float] | None = None
    for j in features:
        vals = x[idx, j]
        order = np.argsort(vals, kind="stable")
        v = vals[order]
        ys = y[idx][order]
        c1 = np.cumsum(ys)
        c2 = np.cumsum(ys * ys)
        pos = np.arange(min_leaf, n - min_leaf + 1)
        if len(pos) == 0:
            continue
        pos = pos[v[pos - 1] < v[pos]]
        if len(pos) == 0:
            continue
        left_n = pos.astype(np.float64)
        right_n = n - left_n
        sse_left = c2[pos - 1] - c1[pos - 1] ** 2 / left_n
        sse_right = (c2[-1] - c2[pos - 1]) - (c1[-1] - c1[pos - 1]) ** 2 / right_n
        total = sse_left + sse_right
        b = int(np.argmin(total))
        if best is None or total[b] < best[2]:
            thr = 0.5 * (v[pos[b] - 1] + v[pos[b]])
            best = (int(j), float(thr), float(total[b]))
    return best


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.dot(p, p))


def _best_split_gini(
    x: np.ndarray,
    y_codes: np.ndarray,
    idx: np.ndarray,
    features: np.ndarray,
    min_leaf: int,
    n_classes: int,
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, weighted child Gini) for a classification node."""
    n = len(idx)
    best: tuple[int, float, float] | None = None
    onehot = np.zeros((n, n_classes))
    for j in features:
        vals = x[idx, j]
        order = np.argsort(vals, kind="stable")
        v = vals[order]
        codes = y_codes[idx][order]
        onehot[:] = 0.0
        onehot[np.arange(n), codes] = 1.0
        cum = np.cumsum(onehot, axis=0)
        pos = np.arange(min_leaf, n - min_leaf + 1)
        if len(pos) == 0:
            continue
        pos = pos[v[pos - 1] < v[pos]]
        if len(pos) == 0:
            continue
        left = cum[pos - 1]
        right = cum[-1] - left
        left_n = pos.astype(np.float64)
        right_n = n - left_n
        gini_left = 1.0 - np.sum(left * left, axis=1) / left_n**2
        gini_right = 1.0 - np.sum(right * right, axis=1) / right_n**2
        weighted = (left_n * gini_left + right_n * gini_right) / n
        b = int(np.argmin(weighted))
        if best is None or weighted[b] < best[2]:
            thr = 0.5 * (v[pos[b] - 1] + v[pos[b]])
            best = (int(j), float(thr), float(weighted[b]))
    return best


def _grow_tree(
    x: np.ndarray,
    y: np.ndarray,
    spec: LearnerSpec,
    rng: np.random.Generator,
    classification: bool,
    n_classes: int = 0,
) -> _Tree:
    tree = _Tree()
    d = x.shape[1]
    m = _subsample_size(spec.feature_subsample, d)

    def node_stats(idx: np.ndarray) -> tuple:
        if classification:
            counts = np.bincount(y[idx].astype(np.intp), minlength=n_classes).astype(float)
            return counts, _gini(counts)
        vals = y[idx]
        mean = float(vals.mean())
        return mean, float(np.sum((vals - mean) ** 2))

    def grow(idx: np.ndarray, depth: int) -> int:
        value, impurity = node_stats(idx)
        node = tree.add_node(value, len(idx), impurity)
        if impurity <= 0.0 or len(idx) < 2 * spec.min_leaf:
            return node
        if spec.max_depth is not None and depth >= spec.max_depth:
            return node
        if m < d:
            features = np.sort(rng.choice(d, size=m, replace=False))
        else:
            features = np.arange(d)
        if classification:
            split = _best_split_gini(x, y, idx, features, spec.min_leaf, n_classes)
            gain = None if split is None else impurity - split[2]
        else:
            split = _best_split_sse(x, y, idx, features, spec.min_leaf)
            gain = None if split is None else impurity - split[2]
        if split is None or gain <= 1e-12:
            return node
        j, thr, _ = split
        mask = x[idx, j] <= thr
        left_id = grow(idx[mask], depth + 1)
        right_id = grow(idx[~mask], depth + 1)
        tree.feature[node] = j
        tree.threshold[node] = thr
        tree.left[node] = left_id
        tree.right[node] = right_id
        return node

    grow(np.arange(x.shape[0]), 0)
    tree.finalize()
    return tree


@dataclass
class TrainedModel:
    """A fitted learner: its spec, training schema, and opaque tree state.

    ``classes`` is set for classifiers (sorted label strings); ``baseline``
    and ``stage_losses`` are set for boosting.  Prediction rejects feature
    matrices whose width differs from the training schema.
    """

    spec: LearnerSpec
    n_features: int
    feature_names: tuple[str, ...] | None
    trees: list[_Tree]
    classes: tuple[str, ...] | None = None
    baseline: float = 0.0
    stage_losses: tuple[float, ...] | None = None

    @property
    def is_classifier(self) -> bool:
        return self.classes is not None

    def _check_matrix(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1) if self.n_features > 1 else x.reshape(-1, 1)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ValueError(
                f"schema mismatch: model was fitted on {self.n_features} features, "
                f"got matrix of shape {np.shape(features)}"
            )
        return x


def fit_regressor(spec: LearnerSpec, train: Dataset) -> TrainedModel:
    """Fit one of the regression kinds on a training dataset."""
    if spec.kind not in REGRESSOR_KINDS:
        raise ValueError(f"{spec.kind!r} is not a regression kind")
    if train.n < 1:
        raise ValueError("empty training set")
    x, y = train.features, train.target

    if spec.kind == KIND_DT:
        tree = _grow_tree(x, y, spec, np.random.default_rng(spec.seed), False)
        return TrainedModel(spec, train.d, train.feature_names, [tree])

    if spec.kind in (KIND_BAGGING, KIND_RF):
        trees = []
        for i in range(spec.n_trees):
            rng = np.random.default_rng(derive_seed(spec.seed, ["tree", str(i)]))
            boot = rng.integers(0, train.n, size=train.n)
            trees.append(_grow_tree(x[boot], y[boot], spec, rng, False))
        return TrainedModel(spec, train.d, train.feature_names, trees)

    # Gradient boosting: stage-wise squared-loss fitting of shallow trees.
    current = np.full(train.n, y.mean())
    trees = []
    losses = []
    for i in range(spec.n_trees):
        rng = np.random.default_rng(derive_seed(spec.seed, ["stage", str(i)]))
        residual = y - current
        tree = _grow_tree(x, residual, spec, rng, False)
        trees.append(tree)
        leaf_values = np.asarray(tree.value, dtype=np.float64)
        current = current + spec.learning_rate * leaf_values[tree.leaf_ids(x)]
        losses.append(float(np.mean((y - current) ** 2)))
    return TrainedModel(
        spec,
        train.d,
        train.feature_names,
        trees,
        baseline=float(y.mean()),
        stage_losses=tuple(losses),
    )


def fit_classifier(spec: LearnerSpec, features, labels) -> TrainedModel:
    """Fit a Gini-impurity CART classifier or a majority-vote forest."""
    if spec.kind not in CLASSIFIER_KINDS:
        raise ValueError(f"{spec.kind!r} is not a classification kind")
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("features must be a nonempty 2-D matrix")
    label_list = [str(v) for v in labels]
    if len(label_list) != x.shape[0]:
        raise ValueError("features and labels disagree on row count")
    if len(label_list) < 2:
        raise ValueError("need at least 2 rows")
    classes = tuple(sorted(set(label_list)))
    code = {c: i for i, c in enumerate(classes)}
    y = np.array([code[v] for v in label_list], dtype=np.intp)

    if spec.kind == KIND_DT_CLF:
        tree = _grow_tree(x, y, spec, np.random.default_rng(spec.seed), True, len(classes))
        return TrainedModel(spec, x.shape[1], None, [tree], classes=classes)

    trees = []
    for i in range(spec.n_trees):
        rng = np.random.default_rng(derive_seed(spec.seed, ["tree", str(i)]))
        boot = rng.integers(0, x.shape[0], size=x.shape[0])
        trees.append(_grow_tree(x[boot], y[boot], spec, rng, True, len(classes)))
    return TrainedModel(spec, x.shape[1], None, trees, classes=classes)


def per_tree_predictions(m: TrainedModel, features) -> np.ndarray:
    """Regression predictions of each tree separately, shape (n_trees, n_rows)."""
    if m.is_classifier:
        raise ValueError("per-tree predictions are for regression models")
    x = m._check_matrix(features)
    out = np.empty((len(m.trees), x.shape[0]))
    for t, tree in enumerate(m.trees):
        leaf_values = np.asarray(tree.value, dtype=np.float64)
        out[t] = leaf_values[tree.leaf_ids(x)]
    return out


def predict(m: TrainedModel, features) -> np.ndarray:
    """Predict targets (regression) or labels (classification) for a matrix."""
    x = m._check_matrix(features)
    if x.shape[0] == 0:
        return np.empty(0) if not m.is_classifier else np.empty(0, dtype=object)

    if m.is_classifier:
        votes = np.zeros((x.shape[0], len(m.classes)), dtype=np.intp)
        for tree in m.trees:
            counts = np.asarray([np.asarray(v) for v in tree.value])
            leaf_counts = counts[tree.leaf_ids(x)]
            # argmax on counts: ties go to the first (lexicographically
            # smallest) class because classes are sorted.
            votes[np.arange(x.shape[0]), np.argmax(leaf_counts, axis=1)] += 1
        winners = np.argmax(votes, axis=1)
        return np.array([m.classes[w] for w in winners], dtype=object)

    if m.spec.kind == KIND_GBT:
        acc = np.full(x.shape[0], m.baseline)
        for tree in m.trees:
            leaf_values = np.asarray(tree.value, dtype=np.float64)
            acc = acc + m.spec.learning_rate * leaf_values[tree.leaf_ids(x)]
        return acc
    return per_tree_predictions(m, x).mean(axis=0)


def gini_importance(m: TrainedModel) -> np.ndarray:
    """Per-feature Gini impurity-decrease totals, averaged over trees.

    Normalized to sum to 1; a forest that never split returns the zero
    vector.
    """
    if not m.is_classifier:
        raise ValueError("Gini importance is defined for fitted classifiers")
    totals = np.zeros(m.n_features)
    for tree in m.trees:
        for node in range(len(tree.feature)):
            j = tree.feature[node]
            if j < 0:
                continue
            left, right = tree.left[node], tree.right[node]
            decrease = (
                tree.n_samples[node] * tree.impurity[node]
                - tree.n_samples[left] * tree.impurity[left]
                - tree.n_samples[right] * tree.impurity[right]
            )
            totals[j] += decrease
    totals /= len(m.trees)
    s = totals.sum()
    return totals / s if s > 0 else totals


def _tree_to_dict(tree: _Tree) -> dict:
    return {
        "feature": np.asarray(tree.feature).tolist(),
        "threshold": np.asarray(tree.threshold).tolist(),
        "left": np.asarray(tree.left).tolist(),
        "right": np.asarray(tree.right).tolist(),
        "value": [np.asarray(v).tolist() for v in tree.value],
        "n_samples": list(tree.n_samples),
        "impurity": list(tree.impurity),
    }


def _tree_from_dict(data: dict, classification: bool) -> _Tree:
    tree = _Tree()
    tree.feature = list(data["feature"])
    tree.threshold = list(data["threshold"])
    tree.left = list(data["left"])
    tree.right = list(data["right"])
    if classification:
        tree.value = [np.asarray(v, dtype=np.float64) for v in data["value"]]
    else:
        tree.value = [float(v) for v in data["value"]]
    tree.n_samples = list(data["n_samples"])
    tree.impurity = list(data["impurity"])
    tree.finalize()
    return tree


def model_to_dict(m: TrainedModel) -> dict:
    """Self-describing, JSON-ready serialization of a trained model."""
    return {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "spec": {
            "kind": m.spec.kind,
            "n_trees": m.spec.n_trees,
            "max_depth": m.spec.max_depth,
            "min_leaf": m.spec.min_leaf,
            "feature_subsample": m.spec.feature_subsample,
            "learning_rate": m.spec.learning_rate,
            "seed": m.spec.seed,
        },
        "n_features": m.n_features,
        "feature_names": list(m.feature_names) if m.feature_names else None,
        "classes": list(m.classes) if m.classes else None,
        "baseline": m.baseline,
        "stage_losses": list(m.stage_losses) if m.stage_losses else None,
        "trees": [_tree_to_dict(t) for t in m.trees],
    }


def model_from_dict(data: dict) -> TrainedModel:
    if data.get("format") != _MODEL_FORMAT:
        raise ValueError("not a serialized model file")
    if data.get("version") != _MODEL_VERSION:
        raise ValueError(f"unsupported model version {data.get('version')}")
    spec = LearnerSpec(**data["spec"])
    classes = tuple(data["classes"]) if data.get("classes") else None
    trees = [_tree_from_dict(t, classes is not None) for t in data["trees"]]
    return TrainedModel(
        spec=spec,
        n_features=int(data["n_features"]),
        feature_names=tuple(data["feature_names"]) if data.get("feature_names") else None,
        trees=trees,
        classes=classes,
        baseline=float(data.get("baseline", 0.0)),
        stage_losses=tuple(data["stage_losses"]) if data.get("stage_losses") else None,
    )


def save_model(m: TrainedModel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(m), fh)


def load_model(path: str | os.PathLike) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
