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
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats
import yaml

from helpers.jobs import run_jobs
from printhead_logs import (ConfigError, EmptyLog, FAILURE_STATES, NfcState,
    NUM_CHANNELS, to_count_series)

logger = logging.getLogger(__name__)

NAN = float("nan")
TREND_ATTRS = ("slope", "intercept", "rvalue", "stderr")
STATS = ("mean", "std", "min", "max")
QUANTILES = (0.05, 0.25, 0.75, 0.95)
PEAK_SUPPORTS = (1, 3, 5)
ENTROPY_BINS = (5, 10)
SIGMA_RATIOS = (1, 2)

def _constant(x):
    return np.ptp(x) == 0

def linear_trend(x):
    """Least-squares line of the series against t = 0..n-1."""

    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return (NAN, NAN, NAN, NAN)
    if _constant(x):
        return (0.0, float(x[0]), 0.0, 0.0)
    fit = stats.linregress(np.arange(x.size, dtype=float), x)
    return (float(fit.slope), float(fit.intercept), float(fit.rvalue), float(fit.stderr))

def autocorrelation(x, lag):
    x = np.asarray(x, dtype=float)
    if lag < 1:
        raise ValueError(f"lag must be positive, got {lag}")
    n = x.size
    if lag >= n:
        return NAN
    if _constant(x):
        return 0.0
    mu = x.mean()
    return float(np.dot(x[:n - lag] - mu, x[lag:] - mu) / ((n - lag) * x.var()))

def cid_ce(x, normalize):
    """Complexity estimate: length of the stretched-out series."""

    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return NAN
    if normalize:
        if _constant(x):
            return 0.0
        x = (x - x.mean()) / x.std()
    return float(np.sqrt(np.sum(np.diff(x) ** 2)))

def derivative_stats(x, order):
    x = np.asarray(x, dtype=float)
    if x.size < order + 1:
        return (NAN, NAN, NAN, NAN)
    d = np.diff(x, n=order)
    return (float(d.mean()), float(d.std()), float(d.min()), float(d.max()))

def step_features(x):
    """Final value, largest step, mean absolute change and mean change."""

    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return (NAN, NAN, NAN, NAN)
    if x.size == 1:
        return (float(x[-1]), 0.0, NAN, NAN)
    d = np.diff(x)
    return (float(x[-1]), float(np.abs(d).max()), float(np.abs(d).mean()), float(d.mean()))

def skewness(x):
    x = np.asarray(x, dtype=float)
    if x.size < 3 or _constant(x):
        return NAN
    return float(stats.skew(x, bias=True))

def kurtosis(x):
    x = np.asarray(x, dtype=float)
    if x.size < 4 or _constant(x):
        return NAN
    return float(stats.kurtosis(x, fisher=True, bias=True))

def quantile(x, q):
    return float(np.quantile(np.asarray(x, dtype=float), q))

def longest_strike(x, above):
    """Longest run strictly above (or below) the series mean."""

    x = np.asarray(x, dtype=float)
    mask = x > x.mean() if above else x < x.mean()
    if not mask.any():
        return 0.0
    edges = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    return float((np.flatnonzero(edges == -1) - np.flatnonzero(edges == 1)).max())

def number_peaks(x, n):
    """Count points strictly greater than their ``n`` neighbours on each side."""

    x = np.asarray(x, dtype=float)
    size = x.size
    if size < 2 * n + 1:
        return 0.0
    center = x[n:size - n]
    peaks = np.ones(center.size, dtype=bool)
    for k in range(1, n + 1):
        peaks &= center > x[n - k:size - n - k]
        peaks &= center > x[n + k:size - n + k]
    return float(peaks.sum())

def binned_entropy(x, bins):
    x = np.asarray(x, dtype=float)
    if _constant(x):
        return 0.0
    counts, _ = np.histogram(x, bins=bins, range=(x.min(), x.max()))
    p = counts[counts > 0] / x.size
    return float(-np.sum(p * np.log(p)))

def ratio_beyond_r_sigma(x, r):
    x = np.asarray(x, dtype=float)
    return float(np.mean(np.abs(x - x.mean()) > r * x.std()))

def distribution_features(x):
    """Distribution statistics of a series, keyed by feature name."""

    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise EmptyLog("distribution features of an empty series")
    values = {"mean": float(x.mean()), "median": float(np.median(x)),
        "std": float(x.std()), "variance": float(x.var()),
        "min": float(x.min()), "max": float(x.max()),
        "skewness": skewness(x), "kurtosis": kurtosis(x)}
    values.update({f"quantile_{q}": quantile(x, q) for q in QUANTILES})
    values["abs_energy"] = float(np.dot(x, x))
    values["count_above_mean"] = float(np.sum(x > x.mean()))
    values["count_below_mean"] = float(np.sum(x < x.mean()))
    values["longest_strike_above_mean"] = longest_strike(x, True)
    values["longest_strike_below_mean"] = longest_strike(x, False)
    values.update({f"number_peaks_{n}": number_peaks(x, n) for n in PEAK_SUPPORTS})
    values.update({f"binned_entropy_{b}": binned_entropy(x, b) for b in ENTROPY_BINS})
    values.update({f"ratio_beyond_r_sigma_{r}": ratio_beyond_r_sigma(x, r)
        for r in SIGMA_RATIOS})
    return values

def spatial_avg_position(grid, nfc):
    """Mean column index of cells in state ``nfc``; NaN when there are none."""

    if NfcState(nfc) == NfcState.EMPTY:
        raise ValueError("average position is defined for failure states only")
    columns = np.nonzero(grid.states == nfc)[1]
    return float(columns.mean()) if columns.size else NAN

def nf4_edge_run(grid):
    """Longest NF4 run touching either edge of any row."""

    mask = grid.states == NfcState.NF4
    longest = 0
    for row in mask:
        for side in (row, row[::-1]):
            run = int(np.argmin(side)) if not side.all() else side.size
            longest = max(longest, run)
    return float(longest)


def _summary(x, stat):
    x = np.asarray(x, dtype=float)
    return float({"mean": np.mean, "median": np.median, "min": np.min,
        "max": np.max}[stat](x)) if x.size else NAN

def _dispersion(x, stat):
    x = np.asarray(x, dtype=float)
    return float(x.std() if stat == "std" else x.var()) if x.size else NAN

def _mean_count(x, side):
    x = np.asarray(x, dtype=float)
    return float(np.sum(x > x.mean() if side == "above" else x < x.mean()))

# family name -> (parameter name, default grid, function of (series, value))
family_registry = {
    "linear_trend": ("attr", TREND_ATTRS,
        lambda x, attr: linear_trend(x)[TREND_ATTRS.index(attr)]),
    "autocorrelation": ("lag", (1, 2, 3, 4, 5, 10, 15, 20), autocorrelation),
    "cid_ce": ("normalize", (False, True), cid_ce),
    "first_derivative": ("stat", STATS,
        lambda x, stat: derivative_stats(x, 1)[STATS.index(stat)]),
    "second_derivative": ("stat", STATS,
        lambda x, stat: derivative_stats(x, 2)[STATS.index(stat)]),
    "final_value": (None, (None,), lambda x, _: step_features(x)[0]),
    "max_step": (None, (None,), lambda x, _: step_features(x)[1]),
    "mean_abs_change": (None, (None,), lambda x, _: step_features(x)[2]),
    "mean_change": (None, (None,), lambda x, _: step_features(x)[3]),
    "summary": ("stat", ("mean", "median", "min", "max"), _summary),
    "dispersion": ("stat", ("std", "variance"), _dispersion),
    "skewness": (None, (None,), lambda x, _: skewness(x)),
    "kurtosis": (None, (None,), lambda x, _: kurtosis(x)),
    "quantile": ("q", QUANTILES, quantile),
    "abs_energy": (None, (None,),
        lambda x, _: float(np.dot(np.asarray(x, float), np.asarray(x, float)))),
    "mean_count": ("side", ("above", "below"), _mean_count),
    "longest_strike": ("side", ("above", "below"),
        lambda x, side: longest_strike(x, side == "above")),
    "number_peaks": ("n", PEAK_SUPPORTS, number_peaks),
    "binned_entropy": ("bins", ENTROPY_BINS, binned_entropy),
    "ratio_beyond_r_sigma": ("r", SIGMA_RATIOS, ratio_beyond_r_sigma),
}

SPATIAL_COLUMNS = tuple(f"spatial__avg_position_{state.name.lower()}"
    for state in FAILURE_STATES) + ("spatial__nf4_edge_run",)


@dataclass(frozen=True)
class FeatureFamily:
    name: str
    values: tuple

    def column_suffixes(self):
        param = family_registry[self.name][0]
        if param is None:
            return [self.name]
        return [f"{self.name}__{param}_{value}" for value in self.values]

    def compute(self, x):
        function = family_registry[self.name][2]
        return [function(x, value) for value in self.values]


@dataclass(frozen=True)
class FeatureCatalog:
    """Ordered feature families applied to every count channel."""

    families: tuple

    @property
    def columns(self):
        names = [f"ch{k}__{suffix}" for k in range(1, NUM_CHANNELS + 1)
            for family in self.families for suffix in family.column_suffixes()]
        return names + list(SPATIAL_COLUMNS)

    @property
    def digest(self):
        return hashlib.sha256(",".join(self.columns).encode()).hexdigest()

    def __len__(self):
        return len(self.columns)


def default_catalog():
    return FeatureCatalog(tuple(FeatureFamily(name, tuple(grid))
        for name, (_, grid, _) in family_registry.items()))

def load_catalog(path):
    """Read a catalog from YAML: a list of ``{family: name, values: [...]}``."""

    with open(path) as f:
        entries = yaml.safe_load(f)
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{path}: catalog must be a non-empty list")
    families = []
    for entry in entries:
        name = entry.get("family") if isinstance(entry, dict) else None
        if name not in family_registry:
            raise ConfigError(f"{path}: unknown feature family {name!r}")
        param, grid, _ = family_registry[name]
        values = tuple(entry.get("values", grid)) if param else (None,)
        families.append(FeatureFamily(name, values))
    catalog = FeatureCatalog(tuple(families))
    if len(set(catalog.columns)) != len(catalog.columns):
        raise ConfigError(f"{path}: duplicate feature columns")
    return catalog

def extract_row(log, catalog):
    """Feature vector of one downsampled log."""

    series = to_count_series(log)
    row = []
    for channel in series.channels.astype(float):
        for family in catalog.families:
            row.extend(family.compute(channel))
    terminal = log.terminal
    row.extend(spatial_avg_position(terminal, state) for state in FAILURE_STATES)
    row.append(nf4_edge_run(terminal))
    return row

def extract_matrix(logs, catalog=None, n_jobs=1):
    """Feature matrix with one row per head, in input order."""

    logs = list(logs)
    if not logs:
        raise EmptyLog("no logs to extract features from")
    catalog = catalog or default_catalog()
    rows = run_jobs(extract_row, [(log, catalog) for log in logs], n_jobs)
    matrix = pd.DataFrame(rows, columns=catalog.columns,
        index=pd.Index([log.head_id for log in logs], name="head_id"), dtype=float)
    logger.info("Extracted %d features for %d heads", matrix.shape[1], matrix.shape[0])
    return matrix
