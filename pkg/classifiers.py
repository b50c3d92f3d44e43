# Copyright 2022 D-Wave Systems Inc.
#
#    Licensed under the Apache License, Version 2.0 (the "License");
#    you may not use this file except in compliance with the License.
#    You may obtain a copy of the License at
#
#        http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS,
#    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#    See the License for the specific language governing permissions and
#    limitations under the License.

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit

from helpers.jobs import derive_seed, run_jobs
from printhead_logs import (CLASS_LABELS, ConfigError, LabelSet, MODEL_NAMES, OTHER,
    PrintheadError, model_init_values, model_ranges, validate_range)

logger = logging.getLogger(__name__)

OVR_PREFIX = "ovr-"
DECISION_THRESHOLD = 0.5
TREE_MODELS = ("dt", "rf", "et")


class FitError(PrintheadError):
    pass

class DomainError(PrintheadError):
    pass


def gini(counts):
    """Gini impurity ``1 - sum(p_k^2)`` of a class-count vector."""

    counts = np.asarray(counts, dtype=float)
    if counts.min(initial=0) < 0:
        raise DomainError("class counts must be non-negative")
    total = counts.sum()
    if total == 0:
        raise DomainError("Gini impurity of an empty node is undefined")
    return float(1 - np.sum((counts / total) ** 2))


@dataclass(frozen=True)
class ModelSpec:
    name: str
    params: dict = field(default_factory=dict)
    ovr: bool = True

    def __post_init__(self):
        if self.name not in MODEL_NAMES:
            raise ConfigError(f"unknown model {self.name!r}; choose from {MODEL_NAMES}")
        params = {**model_init_values[self.name], **self.params}
        for key, value in params.items():
            if key not in model_init_values[self.name]:
                raise ConfigError(f"unknown parameter {key!r} for model {self.name}")
            validate_range(key, value, model_ranges)
        object.__setattr__(self, "params", params)

    @classmethod
    def parse(cls, text, params=None):
        """Build from ``rf`` or ``ovr-rf`` style names."""

        ovr = text.startswith(OVR_PREFIX)
        return cls(text[len(OVR_PREFIX):] if ovr else text, dict(params or {}), ovr)

    @property
    def label(self):
        return f"{OVR_PREFIX if self.ovr else ''}{self.name}"


@dataclass(frozen=True, eq=False)
class DecisionTreeModel:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    impurity: np.ndarray
    n_samples: np.ndarray
    classes: tuple
    params: dict
    seed: int

    @property
    def node_count(self):
        return self.feature.size

    def depth(self):
        depths = np.zeros(self.node_count, dtype=int)
        for node in range(self.node_count):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def apply(self, x):
        """Leaf index reached by every row."""

        x = np.atleast_2d(np.asarray(x, dtype=float))
        nodes = np.zeros(x.shape[0], dtype=int)
        rows = np.arange(x.shape[0])
        while True:
            internal = self.feature[nodes] >= 0
            if not internal.any():
                return nodes
            current = nodes[internal]
            go_left = x[rows[internal], self.feature[current]] <= self.threshold[current]
            nodes[internal] = np.where(go_left, self.left[current], self.right[current])

    def predict_proba(self, x):
        counts = self.value[self.apply(x)]
        return counts / counts.sum(axis=1, keepdims=True)


class _TreeBuilder:
    """Greedy CART growth on Gini decrease."""

    def __init__(self, x, y, n_classes, params, max_features, random_thresholds, rng):
        self.x = x
        self.onehot = np.eye(n_classes)[y]
        self.max_depth = params["max_depth"]
        self.min_samples_split = params["min_samples_split"]
        self.max_features = max_features
        self.random_thresholds = random_thresholds
        self.rng = rng
        self.nodes = []

    def _candidate_columns(self, x):
        varying = x.min(axis=0) < x.max(axis=0)
        if self.max_features is None:
            return np.flatnonzero(varying)
        chosen = []
        for col in self.rng.permutation(x.shape[1]):
            if varying[col]:
                chosen.append(col)
                if len(chosen) == self.max_features:
                    break
        return np.sort(np.array(chosen, dtype=int))

    def _best_split(self, rows, counts, impurity):
        x = self.x[rows]
        y = self.onehot[rows]
        n = rows.size
        best = (-np.inf, -1, 0.0)
        for col in self._candidate_columns(x):
            values = x[:, col]
            if self.random_thresholds:
                threshold = self.rng.uniform(values.min(), values.max())
                left = values <= threshold
                left_counts = y[left].sum(axis=0)
                n_left = left.sum()
                child = (n_left * gini(left_counts) +
                    (n - n_left) * gini(counts - left_counts)) / n
            else:
                order = np.argsort(values, kind="stable")
                ordered = values[order]
                valid = np.flatnonzero(ordered[:-1] < ordered[1:])
                if valid.size == 0:
                    continue
                cumulative = np.cumsum(y[order], axis=0)[valid]
                n_left = (valid + 1).astype(float)
                n_right = n - n_left
                gini_left = 1 - ((cumulative / n_left[:, None]) ** 2).sum(axis=1)
                gini_right = 1 - (((counts - cumulative) / n_right[:, None]) ** 2).sum(axis=1)
                scores = (n_left * gini_left + n_right * gini_right) / n
                k = int(np.argmin(scores))
                child = scores[k]
                low, high = ordered[valid[k]], ordered[valid[k] + 1]
                threshold = (low + high) / 2
                if threshold == high:
                    threshold = low
            gain = impurity - child
            if gain > best[0]:
                best = (gain, int(col), float(threshold))
        return best

    def grow(self, rows, depth):
        counts = self.onehot[rows].sum(axis=0)
        impurity = gini(counts)
        node = len(self.nodes)
        self.nodes.append([-1, 0.0, -1, -1, counts, impurity, rows.size])
        if impurity == 0 or depth >= self.max_depth or rows.size < self.min_samples_split:
            return node
        gain, col, threshold = self._best_split(rows, counts, impurity)
        if col < 0:
            return node
        go_left = self.x[rows, col] <= threshold
        self.nodes[node][:2] = [col, threshold]
        self.nodes[node][2] = self.grow(rows[go_left], depth + 1)
        self.nodes[node][3] = self.grow(rows[~go_left], depth + 1)
        return node


def _class_index(y, classes=None):
    y = np.asarray(y)
    classes = tuple(np.unique(y).tolist()) if classes is None else tuple(classes)
    lookup = {c: i for i, c in enumerate(classes)}
    try:
        return np.array([lookup[v] for v in y.tolist()], dtype=int), classes
    except KeyError as err:
        raise FitError(f"label {err} outside classes {classes}")

def _check_input(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise FitError(f"training data must be a non-empty 2-D array, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise FitError("training data contains NaN or infinite values")
    return x

def fit_tree(x, y, params=None, seed=0, classes=None, rows=None, max_features=None,
        random_thresholds=False):
    """Fit a CART decision tree; ``rows`` may repeat indices (bootstrap)."""

    x = _check_input(x)
    params = {**model_init_values["dt"], **(params or {})}
    y, classes = _class_index(y, classes)
    rows = np.arange(x.shape[0]) if rows is None else np.asarray(rows)
    builder = _TreeBuilder(x, y, len(classes), params, max_features, random_thresholds,
        np.random.default_rng(seed))
    builder.grow(rows, 0)
    columns = list(zip(*builder.nodes))
    return DecisionTreeModel(
        feature=np.array(columns[0], dtype=int),
        threshold=np.array(columns[1], dtype=float),
        left=np.array(columns[2], dtype=int),
        right=np.array(columns[3], dtype=int),
        value=np.array(columns[4], dtype=float),
        impurity=np.array(columns[5], dtype=float),
        n_samples=np.array(columns[6], dtype=int),
        classes=classes, params=params, seed=seed)


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    classes: tuple
    params: dict
    seed: int
    bootstrap: bool

    def predict_proba(self, x):
        return np.mean([tree.predict_proba(x) for tree in self.trees], axis=0)


def _fit_forest_tree(x, y, classes, params, tree_seed, bootstrap, max_features):
    rng = np.random.default_rng(tree_seed)
    rows = rng.integers(0, x.shape[0], x.shape[0]) if bootstrap else None
    return fit_tree(x, y, params, int(rng.integers(2**63)), classes, rows,
        max_features, random_thresholds=not bootstrap)

def fit_forest(x, y, params=None, seed=0, bootstrap=True, classes=None, n_jobs=1):
    """Random forest (bootstrap) or extra trees (random thresholds, full sample)."""

    params = {**model_init_values["rf"], **(params or {})}
    if params["n_trees"] < 1:
        raise ConfigError(f"a forest needs at least one tree, got {params['n_trees']}")
    x = _check_input(x)
    _, classes = _class_index(y, classes)
    max_features = math.ceil(math.sqrt(x.shape[1]))
    tree_params = {key: params[key] for key in ("max_depth", "min_samples_split")}
    trees = run_jobs(_fit_forest_tree, [(x, y, classes, tree_params,
        derive_seed(seed, "tree", i), bootstrap, max_features)
        for i in range(params["n_trees"])], n_jobs)
    return ForestModel(tuple(trees), classes, params, seed, bootstrap)

def predict_score(model, x):
    """Per-class probabilities of a tree or forest, one row per input row."""

    return model.predict_proba(np.atleast_2d(np.asarray(x, dtype=float)))

def predict_class(model, x):
    """Most probable class; the lowest class index wins ties."""

    return [model.classes[i] for i in np.argmax(predict_score(model, x), axis=1)]

def _tree_importance(tree):
    importance = np.zeros(0)
    internal = np.flatnonzero(tree.feature >= 0)
    if internal.size:
        importance = np.zeros(tree.feature.max() + 1)
    for node in internal:
        left, right = tree.left[node], tree.right[node]
        importance[tree.feature[node]] += (
            tree.n_samples[node] * tree.impurity[node] -
            tree.n_samples[left] * tree.impurity[left] -
            tree.n_samples[right] * tree.impurity[right]) / tree.n_samples[0]
    return importance

def gini_importance(model, n_features):
    """Mean decrease in impurity per feature, normalized to sum to 1."""

    trees = model.trees if isinstance(model, ForestModel) else (model,)
    total = np.zeros(n_features)
    for tree in trees:
        importance = np.zeros(n_features)
        raw = _tree_importance(tree)
        importance[:raw.size] = raw
        if importance.sum() > 0:
            total += importance / importance.sum()
    return total / total.sum() if total.sum() > 0 else total


@dataclass(frozen=True, eq=False)
class KnnModel:
    x: np.ndarray
    y: np.ndarray
    classes: tuple
    k: int

    def predict_proba(self, x):
        distances = cdist(np.atleast_2d(np.asarray(x, dtype=float)), self.x, "sqeuclidean")
        nearest = np.argsort(distances, axis=1, kind="stable")[:, :self.k]
        votes = np.stack([np.bincount(row, minlength=len(self.classes))
            for row in self.y[nearest]])
        return votes / self.k


def fit_knn(x, y, k=model_init_values["knn"]["k"], classes=None):
    x = _check_input(x)
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    if k > x.shape[0]:
        raise ConfigError(f"k={k} exceeds the {x.shape[0]} training rows")
    y, classes = _class_index(y, classes)
    return KnnModel(x, y, classes, int(k))

def predict_knn(model, x):
    """Majority vote of the k nearest rows; ties go to the lowest class index."""

    return predict_class(model, x)


@dataclass(frozen=True, eq=False)
class LogRegModel:
    weights: np.ndarray
    bias: float
    params: dict
    losses: tuple
    classes: tuple = (0, 1)

    def predict_proba(self, x):
        score = expit(np.atleast_2d(np.asarray(x, dtype=float)) @ self.weights + self.bias)
        return np.column_stack([1 - score, score])


def logistic_loss(weights, bias, x, y, l2):
    """Mean log-loss plus ``l2/2 * |w|^2``."""

    z = x @ weights + bias
    return float(np.mean(np.logaddexp(0, z) - y * z) + 0.5 * l2 * np.dot(weights, weights))

def logistic_gradient(weights, bias, x, y, l2):
    residual = expit(x @ weights + bias) - y
    return x.T @ residual / x.shape[0] + l2 * weights, float(residual.mean())

def fit_logreg(x, y, l2=model_init_values["logreg"]["l2"],
        epochs=model_init_values["logreg"]["epochs"], lr=model_init_values["logreg"]["lr"],
        tol=model_init_values["logreg"]["tol"]):
    """Full-batch gradient descent from zero weights on binary 0/1 targets."""

    x = _check_input(x)
    y = np.asarray(y, dtype=float)
    if not np.isin(y, (0, 1)).all():
        raise FitError("logistic regression needs 0/1 targets")
    weights = np.zeros(x.shape[1])
    bias = 0.0
    loss = logistic_loss(weights, bias, x, y, l2)
    losses = [loss]
    for epoch in range(epochs):
        gradient, bias_gradient = logistic_gradient(weights, bias, x, y, l2)
        step = lr
        while True:
            new_weights = weights - step * gradient
            new_bias = bias - step * bias_gradient
            new_loss = logistic_loss(new_weights, new_bias, x, y, l2)
            if new_loss <= loss or step < 1e-12:
                break
            step /= 2
        if new_loss > loss:
            break
        weights, bias = new_weights, new_bias
        losses.append(new_loss)
        improvement = loss - new_loss
        loss = new_loss
        if improvement < tol:
            break
    params = {"l2": l2, "epochs": epochs, "lr": lr, "tol": tol}
    return LogRegModel(weights, bias, params, tuple(losses))


@dataclass(frozen=True)
class ConstantScorer:
    """Scorer of a class that had no positive training rows."""

    score: float = 0.0

def fit_base(spec, x, y, seed, classes=None, n_jobs=1):
    """Fit the base model of ``spec`` on single-label targets."""

    params = spec.params
    if spec.name == "dt":
        return fit_tree(x, y, params, seed, classes)
    if spec.name in ("rf", "et"):
        return fit_forest(x, y, params, seed, spec.name == "rf", classes, n_jobs)
    if spec.name == "knn":
        return fit_knn(x, y, params["k"], classes)
    return fit_logreg(x, y, **params)

def binary_score(model, x):
    """Probability of the positive class (label 1) for every row."""

    if isinstance(model, ConstantScorer):
        return np.full(np.atleast_2d(x).shape[0], model.score)
    proba = model.predict_proba(x)
    if 1 not in model.classes:
        return np.zeros(proba.shape[0])
    return proba[:, model.classes.index(1)]


@dataclass(frozen=True, eq=False)
class OvrModel:
    spec: ModelSpec
    scorers: tuple
    seed: int
    classes: tuple = CLASS_LABELS
    threshold: float = DECISION_THRESHOLD
    warnings: tuple = ()


@dataclass(frozen=True, eq=False)
class MulticlassModel:
    """Single-label model trained on each row's primary label."""

    spec: ModelSpec
    model: object
    seed: int


def ovr_fit(spec, x, labelsets, seed, allow_missing=False, n_jobs=1):
    """One binary scorer per class: positives are rows whose label set holds it."""

    scorers = []
    warnings = []
    for index, label in enumerate(CLASS_LABELS):
        y = np.array([1 if label in labels else 0 for labels in labelsets])
        if y.sum() == 0 or y.sum() == y.size:
            if not allow_missing and y.sum() == 0:
                raise FitError(f"class {label} is absent from the training data")
            constant = float(y.sum() > 0)
            message = f"class {label} has a single binary target; constant score {constant}"
            logger.warning(message)
            warnings.append(message)
            scorers.append(ConstantScorer(constant))
            continue
        scorers.append(fit_base(spec, x, y, derive_seed(seed, "ovr", index), (0, 1), n_jobs))
    return OvrModel(spec, tuple(scorers), seed, warnings=tuple(warnings))

def ovr_scores(model, x):
    return np.column_stack([binary_score(scorer, x) for scorer in model.scorers])

def decide_labels(scores, threshold=DECISION_THRESHOLD):
    """Classes scoring at least ``threshold``, else the single best class.

    Other never joins a pattern label: the side with the higher score is kept.
    """

    scores = np.asarray(scores, dtype=float)
    chosen = [c for c, s in zip(CLASS_LABELS, scores) if s >= threshold]
    if not chosen:
        chosen = [CLASS_LABELS[int(np.argmax(scores))]]
    if OTHER in chosen and len(chosen) > 1:
        other = scores[CLASS_LABELS.index(OTHER)]
        patterns = [c for c in chosen if c != OTHER]
        best_pattern = max(scores[CLASS_LABELS.index(c)] for c in patterns)
        chosen = patterns if best_pattern >= other else [OTHER]
    return LabelSet(chosen)

def ovr_predict(model, x):
    return [decide_labels(row, model.threshold) for row in ovr_scores(model, x)]

def fit_model(spec, x, labelsets, seed, allow_missing=False, n_jobs=1):
    """Fit an OVR model, or a multi-class model on primary labels."""

    if spec.ovr or spec.name == "logreg":
        model = ovr_fit(spec, x, labelsets, seed, allow_missing, n_jobs)
        return model if spec.ovr else MulticlassModel(spec, model, seed)
    primary = [labels.primary for labels in labelsets]
    classes = tuple(c for c in CLASS_LABELS if c in primary)
    return MulticlassModel(spec, fit_base(spec, x, primary, seed, classes, n_jobs), seed)

def predict_labels(model, x):
    """Label set per row; never empty."""

    if isinstance(model, OvrModel):
        return ovr_predict(model, x)
    if isinstance(model.model, OvrModel):
        scores = ovr_scores(model.model, x)
        return [LabelSet([CLASS_LABELS[int(np.argmax(row))]]) for row in scores]
    return [LabelSet([label]) for label in predict_class(model.model, x)]

def model_summary(model):
    """Tree counts, depths and node totals of tree-based scorers."""

    scorers = model.scorers if isinstance(model, OvrModel) else (model.model,)
    summary = {}
    for label, scorer in zip(CLASS_LABELS if isinstance(model, OvrModel) else ("all",),
            scorers):
        trees = scorer.trees if isinstance(scorer, ForestModel) else \
            (scorer,) if isinstance(scorer, DecisionTreeModel) else ()
        if trees:
            summary[label] = {"n_trees": len(trees),
                "max_depth": max(tree.depth() for tree in trees),
                "nodes": sum(tree.node_count for tree in trees)}
    return summary
