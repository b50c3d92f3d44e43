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

import numpy as np
import pandas as pd
import pytest

from classifiers import ModelSpec
import evaluation
from pipeline import (SelectorError, fit_impute_scale, fit_l1_selector, fit_pipeline,
    l1_linear_svm, transform)
from printhead_logs import LabelSet, SchemaError

def _planted(n=40, p=10, seed=0):
    rng = np.random.default_rng(seed)
    labels = [LabelSet("Pattern1") if i % 2 else LabelSet("Other") for i in range(n)]
    x = rng.normal(0, 1, (n, p))
    x[:, 3] = [3.0 if i % 2 else -3.0 for i in range(n)] + rng.normal(0, 0.1, n)
    return x, labels

def test_impute_scale_statistics():

    train = pd.DataFrame({"a": [1.0, np.nan, 3.0], "b": [2.0, 2.0, 2.0]})

    imputer = fit_impute_scale(train)
    values = imputer.apply(train)

    assert imputer.means.tolist() == [2.0, 2.0]
    assert imputer.scales[1] == 1.0
    assert values[1, 0] == 0.0
    assert values[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert values[:, 0].std() == pytest.approx(1.0)

def test_impute_scale_errors():

    with pytest.raises(SchemaError):
        fit_impute_scale(pd.DataFrame({"a": [1.0]}))
    imputer = fit_impute_scale(pd.DataFrame({"a": [1.0, 2.0]}))
    with pytest.raises(SchemaError):
        imputer.apply(pd.DataFrame({"b": [1.0, 2.0]}))

def test_selector_keeps_planted_signal():

    x, labels = _planted()

    selected = fit_l1_selector(x, labels, strength=1.0)

    assert 3 in selected
    assert list(selected) == sorted(selected)

# pairs (x, y) and (-x, -y) keep the optimal bias at zero
SYMMETRIC_X = np.array([[2.0], [-2.0], [1.0], [-1.0], [-1.0], [1.0]])
SYMMETRIC_Y = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])

def _hinge_objective(w, b, x, y, penalty):
    return penalty * np.abs(w).sum() + np.maximum(0, 1 - y * (x @ w + b)).sum()

def test_selector_model_minimizes_hinge():
    """Test the exact hinge optimum, which the squared hinge would put at 1/3."""

    w, b, gradient = l1_linear_svm(SYMMETRIC_X, SYMMETRIC_Y, 0.0, 100, 1e-9)

    assert w[0] == pytest.approx(0.5)
    assert b == pytest.approx(0.0)
    assert gradient.tolist() == [-4.0]
    assert _hinge_objective(w, b, SYMMETRIC_X, SYMMETRIC_Y, 0.0) == pytest.approx(4.0)
    assert _hinge_objective(np.array([1 / 3]), 0.0, SYMMETRIC_X, SYMMETRIC_Y, 0.0) > 4.5

def test_selector_model_penalty_zeroes_weights():

    w, b, _ = l1_linear_svm(SYMMETRIC_X, SYMMETRIC_Y, 10.0, 100, 1e-9)

    assert w.tolist() == [0.0]
    assert b == 0.0

def test_selector_support_on_separable_data():
    """Test the default strength keeps the label column and drops the noise."""

    rng = np.random.default_rng(21)
    labels = [LabelSet("Pattern1") if i % 2 else LabelSet("Other") for i in range(200)]
    x = rng.normal(0, 1, (200, 100))
    x[:, 0] = [1.0 if i % 2 else -1.0 for i in range(200)] + rng.normal(0, 0.05, 200)

    selected = fit_l1_selector(x, labels)

    assert 0 in selected
    assert len(selected) <= 10

def test_selector_without_penalty_keeps_all_columns():

    x, labels = _planted()

    assert fit_l1_selector(x, labels, strength=float("inf")) == tuple(range(10))

def test_selector_collapses_duplicate_columns():

    x, labels = _planted()
    x = np.column_stack([x, x[:, 3]])

    selected = fit_l1_selector(x, labels, strength=1.0)

    assert 3 in selected
    assert 10 not in selected

def test_selector_fallback(caplog):
    """Test that an over-strong penalty falls back to the top columns."""

    x, labels = _planted()

    selected = fit_l1_selector(x, labels, strength=1e-9, fallback_top=2)

    assert len(selected) == 2
    assert 3 in selected
    assert "falling back" in caplog.text

def test_selector_needs_two_classes():

    x, _ = _planted()

    with pytest.raises(SelectorError):
        fit_l1_selector(x, [LabelSet("Pattern1")] * x.shape[0])

def test_transform_uses_training_statistics():

    train = pd.DataFrame({"a": [0.0, 2.0, 0.0, 2.0], "b": [1.0, 5.0, 2.0, 4.0]},
        index=["h1", "h2", "h3", "h4"])
    labels = [LabelSet("Pattern1"), LabelSet("Other")] * 2
    test = pd.DataFrame({"a": [np.nan], "b": [3.0]}, index=["h5"])

    pipeline = fit_pipeline(train, labels, seed=1, strength=float("inf"))
    out = transform(pipeline, test)

    assert list(out.index) == ["h5"]
    assert list(out.columns) == pipeline.selected_columns
    if "a" in out.columns:
        assert out.loc["h5", "a"] == 0.0

def test_no_leakage_of_held_out_rows(small_matrix):
    """Test that mutating held-out rows never changes the fitted pipeline."""

    matrix, labels = small_matrix
    rng = np.random.default_rng(9)

    for _ in range(20):
        test = rng.choice(matrix.shape[0], 3, replace=False)
        train = np.setdiff1d(np.arange(matrix.shape[0]), test)
        mutated = matrix.copy()
        mutated.iloc[test] = rng.normal(0, 1e3, (3, matrix.shape[1]))
        train_labels = [labels[i] for i in train]

        original = fit_pipeline(matrix.iloc[train], train_labels, seed=1)
        changed = fit_pipeline(mutated.iloc[train], train_labels, seed=1)

        assert original.state_bytes() == changed.state_bytes()

def test_folds_fit_on_training_rows_only(small_matrix, mocker):

    matrix, labels = small_matrix
    spy = mocker.patch("evaluation.fit_pipeline", wraps=evaluation.fit_pipeline)
    folds = evaluation.stratified_folds(labels, 3, seed=4)

    evaluation.cross_validate(matrix, labels, ModelSpec("dt"), folds, seed=4)

    assert spy.call_count == 3
    for call, test in zip(spy.call_args_list, folds):
        fitted_ids = set(call.args[0].index)
        assert fitted_ids.isdisjoint(matrix.index[test])
        assert len(fitted_ids) == matrix.shape[0] - len(test)
