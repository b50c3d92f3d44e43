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

import hashlib
import logging
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np
import pandas as pd

from classifiers import (ConstantScorer, DecisionTreeModel, ForestModel, ModelSpec,
    MulticlassModel, OvrModel, TREE_MODELS, fit_model, gini_importance, predict_labels)
from helpers.jobs import derive_seed, elapsed, run_jobs
from pipeline import fit_pipeline, transform
from printhead_logs import (CLASS_LABELS, ConfigError, LabelSet, OTHER, PrintheadError,
    SchemaError, run_init_values)

logger = logging.getLogger(__name__)

SCORES = ("precision", "recall", "f1")


class EvalError(PrintheadError):
    pass

class UnsupportedModel(PrintheadError):
    pass


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalReport:
    model: str
    seed: int
    catalog_digest: str
    dataset_digest: str
    excluded: tuple
    per_class: dict
    weighted: dict
    confusion: tuple
    misclassified: tuple
    n_heads: int
    warnings: tuple = ()

    @property
    def n_misclassified(self):
        return len(self.misclassified)

    def confusion_frame(self):
        return pd.DataFrame(self.confusion, index=pd.Index(CLASS_LABELS, name="true"),
            columns=pd.Index(CLASS_LABELS, name="predicted"))


@dataclass(frozen=True, eq=False)
class Comparison:
    a: str
    b: str
    table: pd.DataFrame
    misclassified: dict = field(default_factory=dict)


def align_dataset(matrix, manifest):
    """Sort rows canonically by head id; returns the matrix and its label sets."""

    missing = set(matrix.index) - set(manifest)
    if missing:
        raise SchemaError(f"{len(missing)} heads have features but no labels, "
            f"e.g. {sorted(missing)[0]}")
    if matrix.index.has_duplicates:
        raise SchemaError("duplicate head ids in the feature matrix")
    matrix = matrix.sort_index()
    return matrix, [LabelSet(manifest[head_id]) for head_id in matrix.index]

def dataset_digest(head_ids, labels):
    """sha256 of the canonical ``head_id,labels`` listing."""

    text = "\n".join(f"{h},{l}" for h, l in sorted(zip(head_ids, map(str, labels))))
    return hashlib.sha256(text.encode()).hexdigest()

def _as_sets(true, pred):
    if len(true) != len(pred):
        raise EvalError(f"{len(true)} true label sets but {len(pred)} predictions")
    true = [frozenset(t) for t in true]
    pred = [frozenset(p) for p in pred]
    if any(not p for p in pred):
        raise EvalError("empty prediction")
    return true, pred

def multilabel_prf(true, pred, exclude=()):
    """Per-class precision, recall and F1 plus their support-weighted averages."""

    true, pred = _as_sets(true, pred)
    per_class = {}
    for label in CLASS_LABELS:
        tp = sum(1 for t, p in zip(true, pred) if label in t and label in p)
        fp = sum(1 for t, p in zip(true, pred) if label not in t and label in p)
        fn = sum(1 for t, p in zip(true, pred) if label in t and label not in p)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[label] = ClassScores(precision, recall, f1, tp + fn, tp, fp, fn)

    kept = [c for c in CLASS_LABELS if c not in set(exclude)]
    support = sum(per_class[c].support for c in kept)
    weighted = {score: (sum(per_class[c].support * getattr(per_class[c], score)
        for c in kept) / support if support else 0.0) for score in SCORES}
    weighted["support"] = support
    return per_class, weighted

def confusion_matrix(true, pred):
    """6 x 6 counts, rows by true class and columns by predicted class.

    A hit adds to the diagonal and to (t, p) for every extra predicted p;
    a miss adds to (t, p) for every predicted p.
    """

    true, pred = _as_sets(true, pred)
    index = {label: i for i, label in enumerate(CLASS_LABELS)}
    matrix = np.zeros((len(CLASS_LABELS), len(CLASS_LABELS)), dtype=int)
    for t_set, p_set in zip(true, pred):
        for t in t_set:
            targets = {t} | (p_set - t_set) if t in p_set else p_set
            for p in targets:
                matrix[index[t], index[p]] += 1
    return matrix

def build_report(name, head_ids, true, pred, seed, catalog_digest="", exclude=(),
        warnings=()):
    """Score predictions in canonical head order."""

    order = sorted(range(len(head_ids)), key=head_ids.__getitem__)
    head_ids = [head_ids[i] for i in order]
    true = [true[i] for i in order]
    pred = [pred[i] for i in order]
    per_class, weighted = multilabel_prf(true, pred, exclude)
    confusion = confusion_matrix(true, pred)
    return EvalReport(model=name, seed=seed, catalog_digest=catalog_digest,
        dataset_digest=dataset_digest(head_ids, true),
        excluded=tuple(c for c in CLASS_LABELS if c in set(exclude)),
        per_class=per_class, weighted=weighted,
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        misclassified=tuple(h for h, t, p in zip(head_ids, true, pred)
            if frozenset(t) != frozenset(p)),
        n_heads=len(head_ids), warnings=tuple(warnings))


def _model_warnings(model):
    inner = model.model if isinstance(model, MulticlassModel) else model
    return inner.warnings if isinstance(inner, OvrModel) else ()

def fit_full(matrix, labels, spec, seed, selector=None, catalog_digest="",
        allow_missing=False, n_jobs=1):
    """Fit pipeline and model on every row given."""

    pipeline = fit_pipeline(matrix, labels, seed, catalog_digest, **(selector or {}))
    model = fit_model(spec, transform(pipeline, matrix).to_numpy(), labels,
        derive_seed(seed, "model"), allow_missing, n_jobs)
    return pipeline, model

def _run_fold(matrix, labels, spec, train, test, fold_seed, selector):
    train_labels = [labels[i] for i in train]
    pipeline, model = fit_full(matrix.iloc[train], train_labels, spec, fold_seed,
        selector, allow_missing=True)
    predictions = predict_labels(model, transform(pipeline, matrix.iloc[test]).to_numpy())
    return predictions, _model_warnings(model)

def _run_folds(matrix, labels, spec, folds, seed, selector, n_jobs):
    n = matrix.shape[0]
    arguments = []
    for i, test in enumerate(folds):
        test = np.asarray(test, dtype=int)
        train = np.setdiff1d(np.arange(n), test)
        if train.size < 2 or test.size == 0:
            raise EvalError(f"fold {i} has {train.size} training and {test.size} test rows")
        arguments.append((matrix, labels, spec, train, test,
            derive_seed(seed, "fold", i), selector))
    results = run_jobs(_run_fold, arguments, n_jobs)
    warnings = []
    for i, (_, fold_warnings) in enumerate(results):
        warnings.extend(f"fold {i}: {message}" for message in fold_warnings)
    return [predictions for predictions, _ in results], warnings

def cross_validate(matrix, labels, spec, folds, seed, selector=None, exclude=(),
        catalog_digest="", n_jobs=1):
    """Fit on every fold's complement, predict the fold, score all predictions.

    ``folds`` lists the test row positions of each fold; together they must
    cover every row exactly once.
    """

    covered = np.sort(np.concatenate([np.asarray(f, dtype=int) for f in folds]))
    if not np.array_equal(covered, np.arange(matrix.shape[0])):
        raise EvalError("folds must partition the rows")
    start = perf_counter()
    fold_predictions, warnings = _run_folds(matrix, labels, spec, folds, seed, selector,
        n_jobs)
    predictions = [None] * matrix.shape[0]
    for test, fold in zip(folds, fold_predictions):
        for i, labels_i in zip(test, fold):
            predictions[i] = labels_i
    report = build_report(spec.label, list(matrix.index), labels, predictions, seed,
        catalog_digest, exclude, warnings)
    logger.info("%d-fold evaluation of %s done in %.1f s: weighted F1 %.4f",
        len(folds), spec.label, elapsed(start), report.weighted["f1"])
    return report

def loocv(matrix, labels, spec, seed, selector=None, exclude=(), catalog_digest="",
        n_jobs=1):
    """Leave-one-out cross-validation: one fold per head."""

    if matrix.shape[0] < 2:
        raise EvalError(f"LOOCV needs at least 2 heads, got {matrix.shape[0]}")
    folds = [[i] for i in range(matrix.shape[0])]
    return cross_validate(matrix, labels, spec, folds, seed, selector, exclude,
        catalog_digest, n_jobs)

def stratified_folds(labels, k, seed):
    """Test rows of ``k`` folds, stratified on each head's primary label."""

    n = len(labels)
    if not 2 <= k <= n:
        raise EvalError(f"{k} folds for {n} heads")
    primary = np.array([LabelSet(l).primary for l in labels])
    rng = np.random.default_rng(derive_seed(seed, "stratify"))
    assignment = np.empty(n, dtype=int)
    offset = 0
    for label in CLASS_LABELS:
        members = rng.permutation(np.flatnonzero(primary == label))
        if members.size == 0:
            continue
        if members.size < k:
            logger.warning("Class %s has %d heads for %d folds; assigned round-robin",
                label, members.size, k)
        assignment[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return [np.flatnonzero(assignment == fold) for fold in range(k)]

def kfold_tune(matrix, labels, spec, grid, k=run_init_values["folds"], seed=0,
        selector=None, exclude=(OTHER,), n_jobs=1):
    """Grid search on mean per-fold weighted F1; the earliest grid entry wins ties.

    Returns the best parameter dict and the CV table.
    """

    grid = [dict(entry) for entry in grid]
    if not grid:
        raise ConfigError("empty parameter grid")
    folds = stratified_folds(labels, k, seed)
    rows = []
    for entry in grid:
        candidate = ModelSpec(spec.name, {**spec.params, **entry}, spec.ovr)
        fold_predictions, _ = _run_folds(matrix, labels, candidate, folds, seed,
            selector, n_jobs)
        scores = []
        for test, predictions in zip(folds, fold_predictions):
            _, weighted = multilabel_prf([labels[i] for i in test], predictions, exclude)
            scores.append(weighted["f1"])
        rows.append({**entry, **{f"fold_{i + 1}": s for i, s in enumerate(scores)},
            "mean_f1": float(np.mean(scores)), "std_f1": float(np.std(scores))})
        logger.debug("Grid entry %s: mean weighted F1 %.4f", entry, rows[-1]["mean_f1"])
    table = pd.DataFrame(rows)
    table["rank"] = table["mean_f1"].rank(ascending=False, method="first").astype(int)
    best = grid[int(np.argmax(table["mean_f1"].to_numpy()))]
    logger.info("Best %s parameters %s", spec.label, best)
    return best, table

def importance_report(model, columns, top_n=run_init_values["top_n"]):
    """Top features per OVR class by Gini importance, as DataFrames."""

    inner = model.model if isinstance(model, MulticlassModel) else model
    if model.spec.name not in TREE_MODELS:
        raise UnsupportedModel(f"{model.spec.label} has no feature importances")
    if isinstance(inner, OvrModel):
        scorers = dict(zip(inner.classes, inner.scorers))
    else:
        scorers = {"all": inner}
    tables = {}
    for label, scorer in scorers.items():
        if isinstance(scorer, ConstantScorer):
            weights = np.zeros(len(columns))
        elif isinstance(scorer, (ForestModel, DecisionTreeModel)):
            weights = gini_importance(scorer, len(columns))
        else:
            raise UnsupportedModel(f"scorer of {label} has no feature importances")
        order = np.argsort(-weights, kind="stable")[:top_n]
        tables[label] = pd.DataFrame({"feature": [columns[i] for i in order],
            "weight": weights[order]}, index=pd.RangeIndex(1, order.size + 1, name="rank"))
    return tables

def compare_reports(a, b):
    """Side-by-side per-class and weighted scores with F1 winner flags."""

    if a.dataset_digest != b.dataset_digest:
        raise EvalError("reports were computed on different datasets")
    rows = {}
    for label in list(CLASS_LABELS) + ["weighted"]:
        scores_a = a.weighted if label == "weighted" else vars(a.per_class[label])
        scores_b = b.weighted if label == "weighted" else vars(b.per_class[label])
        row = {}
        for score in SCORES:
            row[f"a_{score}"] = scores_a[score]
            row[f"b_{score}"] = scores_b[score]
            row[f"delta_{score}"] = scores_b[score] - scores_a[score]
        row["support"] = scores_a["support"]
        row["winner"] = a.model if scores_a["f1"] > scores_b["f1"] else \
            b.model if scores_b["f1"] > scores_a["f1"] else "="
        rows[label] = row
    table = pd.DataFrame.from_dict(rows, orient="index")
    table.index.name = "class"
    return Comparison(a.model, b.model, table,
        {"a": a.n_misclassified, "b": b.n_misclassified})
