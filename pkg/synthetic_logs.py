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
from pathlib import Path

import numpy as np
import yaml

from features import linear_trend, nf4_edge_run
from helpers.jobs import derive_seed, run_jobs
from printhead_logs import (CLASS_LABELS, ConfigError, GRID_CELLS, GRID_COLS,
    GRID_ROWS, LabelSet, LogRecord, NozzleGrid, NozzleLog, NUM_CHANNELS, OTHER,
    PATTERN_LABELS, PrintheadError, downsample_first_per_job, lifetime_ranges,
    to_count_series, validate_range)

logger = logging.getLogger(__name__)

DATASET_SPEC_FILE = Path(__file__).parent / "assets" / "dataset_spec.yaml"

SPATIAL_MODES = ("scattered", "contiguous_block", "edge_run", "sparse_burst", "drift")

# Modes that claim a grid region are laid down first on dual-label heads
_MODE_ORDER = {"contiguous_block": 0, "edge_run": 1}

signature_margins = {"scattered_min_failed": 20,
    "scattered_max_run": 5,
    "block_min_jump": 30,
    "block_min_run": 30,
    "burst_quiet_fraction": 0.9,
    "edge_min_run": 10,
    "drift_max_step": 5,
    "drift_total": [10, 60],
    "drift_onset": 0.5}


class GenerationError(PrintheadError):
    pass


@dataclass(frozen=True)
class PatternParams:
    pattern: str
    n_steps: tuple = (60, 200)
    onset: float = 0.2
    intensity: tuple = (20, 60)
    nfc_mix: tuple = (1.0, 0.0, 0.0, 0.0, 0.0)
    spatial_mode: str = "scattered"
    noise_rate: float = 0.0
    cluster: tuple = (0, 0)
    atypical_rate: float = 0.0
    atypical: "PatternParams" = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "n_steps", tuple(int(v) for v in self.n_steps))
        object.__setattr__(self, "intensity", tuple(int(v) for v in self.intensity))
        object.__setattr__(self, "nfc_mix", tuple(float(v) for v in self.nfc_mix))
        object.__setattr__(self, "cluster", tuple(int(v) for v in self.cluster))
        if self.pattern not in CLASS_LABELS:
            raise ConfigError(f"unknown pattern {self.pattern!r}")
        low, high = self.n_steps
        if high < low:
            raise ConfigError(f"{self.pattern}: empty step range {self.n_steps}")
        validate_range("n_steps", low, lifetime_ranges)
        validate_range("n_steps", high, lifetime_ranges)
        if not 0 <= self.onset <= 1:
            raise ConfigError(f"{self.pattern}: onset {self.onset} outside [0, 1]")
        if not 0 <= self.intensity[0] <= self.intensity[1] <= GRID_CELLS // 4:
            raise ConfigError(f"{self.pattern}: intensity {self.intensity} invalid")
        mix = np.array(self.nfc_mix)
        if mix.size != NUM_CHANNELS or mix.min() < 0 or abs(mix.sum() - 1) > 1e-9:
            raise ConfigError(f"{self.pattern}: nfc_mix must be {NUM_CHANNELS} "
                "non-negative weights summing to 1")
        if self.spatial_mode not in SPATIAL_MODES:
            raise ConfigError(f"{self.pattern}: unknown spatial mode {self.spatial_mode!r}")
        if not 0 <= self.noise_rate <= 1:
            raise ConfigError(f"{self.pattern}: noise_rate {self.noise_rate} outside [0, 1]")
        if not 0 <= self.cluster[0] <= self.cluster[1] <= GRID_COLS - 2:
            raise ConfigError(f"{self.pattern}: cluster {self.cluster} invalid")
        if self.cluster[1] and self.pattern != OTHER:
            raise ConfigError(f"{self.pattern}: only {OTHER} heads take a cluster")
        self._check_atypical()

    def _check_atypical(self):
        """Atypical heads vary the parameters but keep what the signature checks."""

        if not 0 <= self.atypical_rate <= 1:
            raise ConfigError(f"{self.pattern}: atypical rate {self.atypical_rate} "
                "outside [0, 1]")
        if self.atypical is None:
            if self.atypical_rate:
                raise ConfigError(f"{self.pattern}: atypical rate without parameters")
            return
        atypical = self.atypical
        if atypical.atypical is not None:
            raise ConfigError(f"{self.pattern}: atypical parameters cannot nest")
        if (atypical.pattern, atypical.spatial_mode, atypical.primary) != \
                (self.pattern, self.spatial_mode, self.primary):
            raise ConfigError(f"{self.pattern}: atypical parameters must keep the pattern, "
                "spatial mode and primary channel")

    @property
    def primary(self):
        """NFC code (1..5) with the largest mix weight."""

        return int(np.argmax(self.nfc_mix)) + 1

    def draw(self, rng):
        """Parameters of one head: the atypical variant at ``atypical_rate``."""

        if self.atypical is not None and rng.random() < self.atypical_rate:
            return self.atypical
        return self


@dataclass(frozen=True)
class DatasetSpec:
    class_counts: dict
    seed: int
    params: dict
    head_id_format: str = "PH{:04d}"
    records_per_job: tuple = (1, 2)

    def __post_init__(self):
        counts = {}
        for key, count in self.class_counts.items():
            label_set = LabelSet(key)
            if int(count) < 0:
                raise ConfigError(f"negative count for {key}")
            if int(count):
                counts[str(label_set)] = int(count)
            missing = set(label_set) - set(self.params)
            if missing:
                raise ConfigError(f"no pattern parameters for {sorted(missing)}")
        if not counts:
            raise ConfigError("dataset spec has no heads")
        object.__setattr__(self, "class_counts", counts)
        low, high = self.records_per_job
        validate_range("records_per_job", low, lifetime_ranges)
        validate_range("records_per_job", high, lifetime_ranges)
        if high < low:
            raise ConfigError(f"empty records_per_job range {self.records_per_job}")

    @property
    def n_heads(self):
        return sum(self.class_counts.values())

    @property
    def n_labels(self):
        return sum(len(LabelSet(key)) * count for key, count in self.class_counts.items())


def _pattern_params(name, values):
    values = dict(values)
    atypical = values.pop("atypical", None)
    if atypical is None:
        return PatternParams(pattern=name, **values)
    atypical = dict(atypical)
    rate = atypical.pop("rate", 0.0)
    return PatternParams(pattern=name, atypical_rate=rate,
        atypical=PatternParams(pattern=name, **{**values, **atypical}), **values)

def load_dataset_spec(path=DATASET_SPEC_FILE, seed=None):
    """Read a dataset spec from YAML; ``seed`` overrides the file's seed."""

    with open(path) as f:
        config = yaml.safe_load(f) or {}
    seed = config.get("seed") if seed is None else seed
    if seed is None:
        raise ConfigError(f"{path}: no seed configured")
    try:
        params = {name: _pattern_params(name, values)
            for name, values in config["params"].items()}
        return DatasetSpec(class_counts=config["class_counts"], seed=int(seed),
            params=params,
            head_id_format=config.get("head_id_format", "PH{:04d}"),
            records_per_job=tuple(config.get("records_per_job", (1, 2))))
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"{path}: invalid dataset spec ({err})")


class _Canvas:
    """Per-step grid states of one head under construction."""

    def __init__(self, n_steps, rng):
        self.n = n_steps
        self.rng = rng
        self.state = np.zeros((n_steps, GRID_ROWS, GRID_COLS), dtype=np.uint8)
        self.claimed = np.zeros((GRID_ROWS, GRID_COLS), dtype=bool)

    def fail(self, cell, code, start, stop=None):
        row, col = cell
        self.state[start:stop, row, col] = code
        self.claimed[row, col] = True

    def scattered_cells(self, count, avoid_edges=False):
        """Unclaimed cells with no claimed neighbour in the same row."""

        chosen = []
        for flat in self.rng.permutation(GRID_CELLS):
            if len(chosen) == count:
                break
            row, col = divmod(int(flat), GRID_COLS)
            if avoid_edges and col in (0, GRID_COLS - 1):
                continue
            neighbours = self.claimed[row, max(col - 1, 0):col + 2]
            if neighbours.any():
                continue
            self.claimed[row, col] = True
            chosen.append((row, col))
        return chosen


def _channel_codes(rng, count, mix):
    """NFC codes for ``count`` cells: the primary share fixed, the rest drawn."""

    mix = np.array(mix)
    primary = int(np.argmax(mix))
    others = mix.copy()
    others[primary] = 0
    if count == 0:
        return np.full(count, primary + 1, dtype=np.uint8)
    n_primary = min(count, max(1, int(round(mix[primary] * count))))
    codes = np.full(count, primary + 1, dtype=np.uint8)
    if others.sum() > 0:
        codes[n_primary:] = rng.choice(NUM_CHANNELS, count - n_primary,
            p=others / others.sum()) + 1
    return codes[rng.permutation(count)]

def _secondary_codes(rng, count, mix):
    """Codes drawn from the non-primary part of the mix; empty if there is none."""

    mix = np.array(mix)
    others = mix.copy()
    others[int(np.argmax(mix))] = 0
    if count == 0 or others.sum() == 0:
        return np.zeros(0, dtype=np.uint8)
    return (rng.choice(NUM_CHANNELS, count, p=others / others.sum()) + 1).astype(np.uint8)

def _spread(start, stop, count):
    """``count`` steps spread evenly over [start, stop)."""

    span = max(stop - start, 1)
    return start + (np.arange(count) * span) // max(count, 1)

def _onset_step(rng, params, n):
    if params.spatial_mode == "sparse_burst":
        return min(math.ceil(params.onset * n), n - 1)
    jitter = int(rng.integers(0, int(0.15 * n) + 1))
    return max(1, min(int(params.onset * n) + jitter, n - 2))

def _intensity(rng, params):
    return int(rng.integers(params.intensity[0], params.intensity[1] + 1))

def _scattered(canvas, rng, params, start):
    total = _intensity(rng, params)
    transient = total // 10
    cells = canvas.scattered_cells(total + transient)
    codes = _channel_codes(rng, len(cells), params.nfc_mix)
    times = _spread(start, canvas.n - 1, len(cells))
    recovering = set(rng.choice(len(cells), min(transient, len(cells)), replace=False).tolist())
    for i, cell in enumerate(cells):
        stop = None
        if i in recovering:
            stop = min(canvas.n - 1, int(times[i] + rng.integers(3, 15)))
        canvas.fail(cell, codes[i], int(times[i]), stop)

def _background(canvas, rng, params, count):
    codes = _secondary_codes(rng, count, params.nfc_mix)
    cells = canvas.scattered_cells(codes.size)
    times = _spread(1, canvas.n - 1, len(cells))
    for cell, code, t in zip(cells, codes, times):
        canvas.fail(cell, code, int(t))

def _contiguous_block(canvas, rng, params, start):
    length = min(_intensity(rng, params), GRID_COLS)
    row = int(rng.integers(GRID_ROWS))
    col = int(rng.integers(0, GRID_COLS - length + 1))
    canvas.state[start:, row, col:col + length] = params.primary
    canvas.claimed[row, col:col + length] = True
    _background(canvas, rng, params, int(rng.integers(0, length // 8 + 1)))

def _edge_run(canvas, rng, params, start):
    length = min(_intensity(rng, params), GRID_COLS)
    row = int(rng.integers(GRID_ROWS))
    left = bool(rng.integers(2))
    for j in range(length):
        col = j if left else GRID_COLS - 1 - j
        t = start + (j * (canvas.n - 1 - start)) // length
        canvas.fail((row, col), params.primary, t)
    _background(canvas, rng, params, int(rng.integers(0, 11)))

def _sparse_burst(canvas, rng, params, start):
    cells = canvas.scattered_cells(_intensity(rng, params))
    codes = _channel_codes(rng, len(cells), params.nfc_mix)
    for cell, code, t in zip(cells, codes, _spread(start, canvas.n, len(cells))):
        canvas.fail(cell, code, int(t))

def _drift(canvas, rng, params, start):
    total = _intensity(rng, params)
    transient = int(round(0.2 * total))
    cells = canvas.scattered_cells(total + transient)
    codes = _channel_codes(rng, len(cells), params.nfc_mix)
    times = _spread(start, canvas.n - 1, len(cells))
    duration = int(rng.integers(5, 20))
    recovering = set(rng.choice(len(cells), min(transient, len(cells)), replace=False).tolist())
    for i, cell in enumerate(cells):
        stop = int(times[i]) + duration if i in recovering else None
        canvas.fail(cell, codes[i], int(times[i]), stop)

def _transient_episodes(canvas, rng, params):
    """Atypical head: short failure episodes and a few early persistent failures."""

    n = canvas.n
    if params.cluster[1]:
        _cluster(canvas, rng, params)
    for episode in range(int(rng.integers(1, 4))):
        if episode == 0:
            start = int(rng.integers(int(0.05 * n), int(0.45 * n) + 1))
        else:
            start = int(rng.integers(0, int(0.7 * n) + 1))
        cells = canvas.scattered_cells(int(rng.integers(3, 16)), avoid_edges=True)
        stop = min(start + int(rng.integers(2, 11)), n - 2)
        for cell, code in zip(cells, _channel_codes(rng, len(cells), params.nfc_mix)):
            canvas.fail(cell, code, start, stop)
    cells = canvas.scattered_cells(_intensity(rng, params), avoid_edges=True)
    for cell, code in zip(cells, _channel_codes(rng, len(cells), params.nfc_mix)):
        canvas.fail(cell, code, int(rng.integers(0, n // 2 + 1)))

def _cluster(canvas, rng, params):
    """Same-row run of the primary code failing at a single step, away from the edges."""

    length = int(rng.integers(params.cluster[0], params.cluster[1] + 1))
    if length == 0:
        return
    row = int(rng.integers(GRID_ROWS))
    col = int(rng.integers(1, GRID_COLS - length))
    start = int(rng.integers(int(0.1 * canvas.n), int(0.6 * canvas.n) + 1))
    canvas.state[start:, row, col:col + length] = params.primary
    canvas.claimed[row, col:col + length] = True

mode_builders = {"scattered": _scattered,
    "contiguous_block": _contiguous_block,
    "edge_run": _edge_run,
    "sparse_burst": _sparse_burst,
    "drift": _drift}

def _add_noise(canvas, rng, noise_rate, mix):
    """Transient failures on working nozzles; the terminal step stays clean."""

    k_max = int(noise_rate * GRID_CELLS)
    if k_max == 0:
        return
    codes = np.arange(1, NUM_CHANNELS + 1)
    for t in range(canvas.n - 1):
        k = int(rng.binomial(k_max, 0.5))
        if k == 0:
            continue
        flat = canvas.state[t].reshape(-1)
        free = np.flatnonzero(flat == 0)
        k = min(k, free.size)
        if k == 0:
            continue
        cells = rng.choice(free, k, replace=False)
        flat[cells] = rng.choice(codes, k, p=mix)

def generate_head(pattern_params, head_seed, head_id="PH0000", records_per_job=(1, 2)):
    """Raw nozzle log of one printhead following one or more archetypes."""

    params_list = [pattern_params] if isinstance(pattern_params, PatternParams) \
        else list(pattern_params)
    if not params_list:
        raise ConfigError("no pattern parameters given")
    labels = LabelSet(p.pattern for p in params_list)
    rng = np.random.default_rng(head_seed)
    params_list = [params.draw(rng) for params in params_list]
    low, high = params_list[0].n_steps
    canvas = _Canvas(int(rng.integers(low, high + 1)), rng)

    for params in sorted(params_list, key=lambda p: _MODE_ORDER.get(p.spatial_mode, 2)):
        if params.pattern == OTHER:
            _transient_episodes(canvas, rng, params)
        else:
            start = _onset_step(rng, params, canvas.n)
            mode_builders[params.spatial_mode](canvas, rng, params, start)

    noisiest = max(params_list, key=lambda p: p.noise_rate)
    _add_noise(canvas, rng, noisiest.noise_rate, np.array(noisiest.nfc_mix))

    records = []
    t = 0
    flicker = noisiest.noise_rate > 0
    for job, states in enumerate(canvas.state):
        for copy in range(int(rng.integers(records_per_job[0], records_per_job[1] + 1))):
            grid = states
            if copy and flicker and not states.all():
                grid = states.copy().reshape(-1)
                grid[rng.choice(np.flatnonzero(grid == 0))] = noisiest.primary
            records.append(LogRecord(head_id, job, t, NozzleGrid(grid)))
            t += 1
    return NozzleLog(head_id, records), labels


def _longest_row_run(states, code):
    longest = 0
    for row in states == code:
        edges = np.diff(np.concatenate(([0], row.astype(np.int8), [0])))
        if row.any():
            longest = max(longest, int((np.flatnonzero(edges == -1) -
                np.flatnonzero(edges == 1)).max()))
    return longest

def signature_holds(log, pattern, params):
    """Check the archetype signature of ``pattern`` on a raw or downsampled log."""

    log = downsample_first_per_job(log.records)
    channels = to_count_series(log).channels
    total = channels.sum(axis=0)
    terminal = log.terminal.states
    n = total.size
    primary = channels[params.primary - 1]
    margins = signature_margins

    if pattern == "Pattern1":
        return (np.count_nonzero(terminal) >= margins["scattered_min_failed"] and
            _longest_row_run(terminal, params.primary) <= margins["scattered_max_run"] and
            linear_trend(primary)[0] > 0)
    if pattern == "Pattern2":
        return (n > 1 and np.diff(primary).max() >= margins["block_min_jump"] and
            _longest_row_run(terminal, params.primary) >= margins["block_min_run"])
    if pattern == "Pattern3":
        active = np.flatnonzero(total)
        quiet = margins["burst_quiet_fraction"]
        return (np.mean(total == 0) >= quiet and
            all(t >= quiet * n for t in active))
    if pattern == "Pattern4":
        return nf4_edge_run(log.terminal) >= margins["edge_min_run"]
    if pattern == "Pattern5":
        low, high = margins["drift_total"]
        active = np.flatnonzero(total)
        steps = np.abs(np.diff(channels, axis=1)).max() if n > 1 else 0
        return (steps <= margins["drift_max_step"] and low <= total[-1] <= high and
            active.size > 0 and active[0] < margins["drift_onset"] * n)
    raise ValueError(f"no signature for {pattern}")

def other_signature_holds(log, params_by_pattern):
    """An atypical head fails at least one signature of every pattern."""

    return not any(signature_holds(log, pattern, params_by_pattern[pattern])
        for pattern in PATTERN_LABELS if pattern in params_by_pattern)


def _generate_one(spec, index, head_id, label_key):
    params = [spec.params[label] for label in LabelSet(label_key)]
    log, labels = generate_head(params, derive_seed(spec.seed, "head", index),
        head_id, spec.records_per_job)
    return log, labels

def generate_dataset(spec, n_jobs=1):
    """Generate every head of a ``DatasetSpec``; returns logs and a head_id -> LabelSet manifest."""

    keys = [key for key, count in spec.class_counts.items() for _ in range(count)]
    order = np.random.default_rng(derive_seed(spec.seed, "assign")).permutation(len(keys))
    keys = [keys[i] for i in order]
    head_ids = [spec.head_id_format.format(i + 1) for i in range(len(keys))]
    if len(set(head_ids)) != len(head_ids):
        raise GenerationError(f"head id format {spec.head_id_format!r} yields "
            "duplicate head ids")

    results = run_jobs(_generate_one,
        [(spec, i, head_id, key) for i, (head_id, key) in enumerate(zip(head_ids, keys))],
        n_jobs)
    logs = [log for log, _ in results]
    manifest = {log.head_id: labels for log, labels in results}
    logger.info("Generated %d heads with %d labels", len(logs),
        sum(len(labels) for labels in manifest.values()))
    return logs, manifest
