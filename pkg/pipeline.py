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
from dataclasses import dataclass

import numpy as np
import pandas as pd

from printhead_logs import (CLASS_LABELS, PrintheadError, SchemaError,
    selector_init_values, selector_ranges, validate_range)

logger = logging.getLogger(__name__)


class SelectorError(PrintheadError):
    pass


@dataclass(frozen=True, eq=False)
class ImputeScale:
    columns: tuple
    means: np.ndarray
    scales: np.ndarray

    def apply(self, matrix):
        """Impute with the fitted means, then z-score; returns an array."""

        if tuple(matrix.columns) != self.columns:
            raise SchemaError(f"feature columns do not match the fitted pipeline "
                f"({matrix.shape[1]} vs {len(self.columns)} columns)")
        values = matrix.to_numpy(dtype=float)
        values = np.where(np.isnan(values), self.means, values)
        return (values - self.means) / self.scales


@dataclass(frozen=True, eq=False)
class FittedPipeline:
    imputer: ImputeScale
    selected: tuple
    seed: int
    catalog_digest: str
    strength: float

    @property
    def columns(self):
        return self.imputer.columns

    @property
    def selected_columns(self):
        return [self.imputer.columns[i] for i in self.selected]

    def state_bytes(self):
        """Fitted statistics as bytes, for bitwise comparisons."""

        return (self.imputer.means.tobytes() + self.imputer.scales.tobytes() +
            np.array(self.selected, dtype=np.int64).tobytes())


def fit_impute_scale(train):
    """Column means (ignoring NaN) and population standard deviations."""

    if train.shape[0] < 2:
        raise SchemaError(f"imputation and scaling need at least 2 rows, got {train.shape[0]}")
    values = train.to_numpy(dtype=float)
    present = ~np.isnan(values)
    counts = present.sum(axis=0)
    sums = np.where(present, values, 0.0).sum(axis=0)
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    imputed = np.where(present, values, means)
    stds = imputed.std(axis=0)
    scales = np.where(stds == 0, 1.0, stds)
    means.setflags(write=False)
    scales.setflags(write=False)
    return ImputeScale(tuple(train.columns), means, scales)

def _line_minimum(a, r, current, penalty=0.0):
    """Minimizer over v of ``penalty*|v| + sum(max(0, r - a*(v - current)))``.

    The function is convex and piecewise linear, so a knot attains the minimum;
    flat optima resolve to the point nearest zero.
    """

    nonzero = a != 0
    a, r = a[nonzero], r[nonzero]
    knots = current + r / a
    weights = np.abs(a)
    if penalty > 0:
        knots = np.append(knots, 0.0)
        weights = np.append(weights, 2 * penalty)
    if knots.size == 0:
        return current
    order = np.argsort(knots, kind="stable")
    knots, weights = knots[order], weights[order]
    start = -a[a > 0].sum() - penalty
    if start >= 0:
        return float(min(0.0, knots[0]))
    slope = start + np.cumsum(weights)
    k = min(int(np.searchsorted(slope, 0.0)), knots.size - 1)
    if slope[k] > 0:
        return float(knots[k])
    upper = knots[k + 1] if k + 1 < knots.size else np.inf
    return float(np.clip(0.0, knots[k], upper))

def l1_linear_svm(x, y, penalty, max_epochs, tolerance):
    """Coordinate descent on ``penalty*|w|_1 + sum(max(0, 1 - y(xw + b)))``.

    Every step minimizes the objective exactly along one coordinate. Returns
    weights, bias and the hinge loss gradient at ``w = 0, b = 0``.
    """

    n, p = x.shape
    w = np.zeros(p)
    b = 0.0
    margins = y[:, None] * x
    slack = np.ones(n)
    gradient_at_zero = -margins.sum(axis=0)
    objective = float(n)

    for epoch in range(max_epochs):
        gradient = -margins[slack > 0].sum(axis=0)
        working = np.flatnonzero((w != 0) | (np.abs(gradient) > penalty))
        delta = 0.0
        for j in working:
            new = _line_minimum(margins[:, j], slack, w[j], penalty)
            step = new - w[j]
            if step != 0:
                slack -= margins[:, j] * step
                w[j] = new
                delta = max(delta, abs(step))
        new = _line_minimum(y, slack, b)
        slack -= y * (new - b)
        delta = max(delta, abs(new - b))
        b = new
        previous = objective
        objective = penalty * np.abs(w).sum() + np.maximum(slack, 0).sum()
        if delta < tolerance or previous - objective < tolerance:
            break
    logger.debug("L1 selector model converged after %d epochs", epoch + 1)
    return w, b, gradient_at_zero

def fit_l1_selector(train, labels, strength=selector_init_values["strength"],
        max_epochs=selector_init_values["max_epochs"],
        tolerance=selector_init_values["tolerance"],
        fallback_top=selector_init_values["fallback_top"]):
    """Indices of columns with a nonzero weight in any per-class L1 model."""

    validate_range("strength", strength, selector_ranges)
    values = np.asarray(train, dtype=float)
    present = [c for c in CLASS_LABELS if any(c in row for row in labels)]
    if len(present) < 2:
        raise SelectorError(f"feature selection needs 2 or more classes, got {present}")

    if np.isinf(strength):
        return tuple(range(values.shape[1]))
    _, first = np.unique(values, axis=1, return_index=True)
    candidates = np.sort(first)
    x = values[:, candidates]
    penalty = 1.0 / strength
    weight_sum = np.zeros(candidates.size)
    gradient_sum = np.zeros(candidates.size)
    for label in present:
        y = np.array([1.0 if label in row else -1.0 for row in labels])
        if np.all(y > 0):
            logger.warning("Class %s labels every row; skipped in selection", label)
            continue
        w, _, gradient = l1_linear_svm(x, y, penalty, max_epochs, tolerance)
        weight_sum += np.abs(w)
        gradient_sum += np.abs(gradient)

    selected = candidates[weight_sum > 0]
    if selected.size == 0:
        order = np.lexsort((candidates, -gradient_sum, -weight_sum))
        selected = candidates[order[:fallback_top]]
        logger.warning("L1 selector kept no column; falling back to top %d", selected.size)
    return tuple(sorted(int(i) for i in selected))

def fit_pipeline(train, labels, seed, catalog_digest="", **selector):
    """Fit imputation, scaling and selection on the training partition only."""

    imputer = fit_impute_scale(train)
    selected = fit_l1_selector(imputer.apply(train), labels, **selector)
    strength = selector.get("strength", selector_init_values["strength"])
    logger.debug("Pipeline keeps %d of %d columns", len(selected), train.shape[1])
    return FittedPipeline(imputer, selected, seed, catalog_digest, strength)

def transform(pipeline, matrix):
    """Impute, scale and project onto the selected columns."""

    values = pipeline.imputer.apply(matrix)[:, list(pipeline.selected)]
    return pd.DataFrame(values, index=matrix.index, columns=pipeline.selected_columns)
