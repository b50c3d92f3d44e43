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
from enum import IntEnum

import numpy as np

logger = logging.getLogger(__name__)

GRID_ROWS = 4
GRID_COLS = 128
GRID_CELLS = GRID_ROWS * GRID_COLS
NUM_CHANNELS = 5

CLASS_LABELS = ("Pattern1", "Pattern2", "Pattern3", "Pattern4", "Pattern5", "Other")
PATTERN_LABELS = CLASS_LABELS[:-1]
OTHER = "Other"

MODEL_NAMES = ("dt", "rf", "et", "knn", "logreg")

lifetime_ranges = {"n_steps": [10, 1000],
    "records_per_job": [1, 10],
    "last_jobs": [1, 100000]}

selector_ranges = {"strength": [1e-9, float("inf")],
    "max_epochs": [1, 100000],
    "tolerance": [0, 1],
    "fallback_top": [1, 100000]}

model_ranges = {"n_trees": [1, 5000],
    "max_depth": [1, 200],
    "min_samples_split": [2, 100000],
    "k": [1, 100000],
    "l2": [0, 1e6],
    "epochs": [1, 1000000],
    "lr": [1e-12, 1e3],
    "tol": [0, 1]}

run_ranges = {"seed": [0, 2**64 - 1],
    "folds": [2, 100000],
    "n_jobs": [-1, 1024],
    "top_n": [1, 1000]}

selector_init_values = {"strength": 0.01, "max_epochs": 1000, "tolerance": 1e-6,
    "fallback_top": 32}

model_init_values = {
    "dt": {"max_depth": 20, "min_samples_split": 2},
    "rf": {"n_trees": 50, "max_depth": 20, "min_samples_split": 2},
    "et": {"n_trees": 50, "max_depth": 20, "min_samples_split": 2},
    "knn": {"k": 5},
    "logreg": {"l2": 0.01, "epochs": 500, "lr": 0.1, "tol": 1e-8}}

run_init_values = {"folds": 10, "n_jobs": 1, "top_n": 10, "last_jobs": 100}


class PrintheadError(Exception):
    """Base class of all errors raised on bad user input or configuration."""

class EmptyLog(PrintheadError):
    pass

class ParseError(PrintheadError):
    """Malformed line in a log, manifest or matrix file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

class SchemaError(PrintheadError):
    pass

class ConfigError(PrintheadError):
    pass


def validate_range(name, value, ranges):
    """Raise ``ConfigError`` if a configured value lies outside its range."""

    low, high = ranges[name]
    if value is None or not low <= value <= high:
        raise ConfigError(f"{name}={value} outside range [{low}, {high}]")
    return value


class NfcState(IntEnum):
    """Nozzle failure classification; ``EMPTY`` is a working nozzle."""

    EMPTY = 0
    NF1 = 1
    NF2 = 2
    NF3 = 3
    NF4 = 4
    NF5 = 5

FAILURE_STATES = tuple(NfcState)[1:]


class NozzleGrid:
    """Immutable 4 x 128 grid of nozzle states, stored row-major."""

    __slots__ = ("states",)

    def __init__(self, states):
        states = np.array(states, dtype=np.uint8)
        if states.shape == (GRID_CELLS,):
            states = states.reshape(GRID_ROWS, GRID_COLS)
        if states.shape != (GRID_ROWS, GRID_COLS):
            raise SchemaError(f"grid shape {states.shape} is not "
                f"({GRID_ROWS}, {GRID_COLS})")
        if states.size and states.max() > NfcState.NF5:
            raise SchemaError(f"unknown nozzle state {int(states.max())}")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    def __setattr__(self, name, value):
        raise AttributeError("NozzleGrid is immutable")

    def __reduce__(self):
        return (NozzleGrid, (self.states,))

    def __eq__(self, other):
        return isinstance(other, NozzleGrid) and np.array_equal(self.states, other.states)

    def __hash__(self):
        return hash(self.states.tobytes())

    def __repr__(self):
        return f"NozzleGrid(failed={self.failed_count()})"

    @classmethod
    def empty(cls):
        return cls(np.zeros((GRID_ROWS, GRID_COLS), dtype=np.uint8))

    def failed_count(self):
        return int(np.count_nonzero(self.states))

    def channel_counts(self):
        """Return the number of cells per failure state NF1..NF5."""

        return np.bincount(self.states.ravel(), minlength=NUM_CHANNELS + 1)[1:]


def channel_view(grid):
    """Return 5 binary planes; plane k is set where the state is NF(k+1)."""

    codes = np.arange(1, NUM_CHANNELS + 1, dtype=np.uint8)[:, None, None]
    return (grid.states[None, :, :] == codes).astype(np.uint8)


@dataclass(frozen=True)
class LogRecord:
    head_id: str
    job_id: int
    t: int
    grid: NozzleGrid

    def __post_init__(self):
        if self.job_id < 0 or self.t < 0:
            raise SchemaError(f"negative job_id or t in record of {self.head_id}")


@dataclass(frozen=True)
class NozzleLog:
    head_id: str
    records: tuple

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise EmptyLog(f"log of {self.head_id} has no records")
        previous = -1
        for record in self.records:
            if record.head_id != self.head_id:
                raise SchemaError(f"record of {record.head_id} in log of {self.head_id}")
            if record.t <= previous:
                raise SchemaError(f"time-steps of {self.head_id} not strictly "
                    f"increasing at t={record.t}")
            previous = record.t

    def __len__(self):
        return len(self.records)

    @property
    def terminal(self):
        """Last logged grid state of the printhead."""

        return self.records[-1].grid


@dataclass(frozen=True, eq=False)
class CountSeries:
    head_id: str
    channels: np.ndarray

    def __post_init__(self):
        channels = np.array(self.channels, dtype=np.int64)
        if channels.ndim != 2 or channels.shape[0] != NUM_CHANNELS or channels.shape[1] < 1:
            raise SchemaError(f"count series of {self.head_id} has shape {channels.shape}")
        if channels.min() < 0 or channels.max() > GRID_CELLS:
            raise SchemaError(f"count series of {self.head_id} out of [0, {GRID_CELLS}]")
        channels.setflags(write=False)
        object.__setattr__(self, "channels", channels)

    def __eq__(self, other):
        return (isinstance(other, CountSeries) and self.head_id == other.head_id and
            np.array_equal(self.channels, other.channels))

    def __len__(self):
        return self.channels.shape[1]

    def total(self):
        return self.channels.sum(axis=0)


class LabelSet:
    """Non-empty set of failure mechanisms, iterated in canonical class order."""

    __slots__ = ("labels",)

    def __init__(self, labels):
        if isinstance(labels, str):
            labels = labels.split("|")
        labels = frozenset(label.strip() for label in labels)
        unknown = labels - set(CLASS_LABELS)
        if unknown:
            raise SchemaError(f"unknown labels {sorted(unknown)}")
        if not labels:
            raise SchemaError("label set is empty")
        if OTHER in labels and len(labels) > 1:
            raise SchemaError(f"{OTHER} cannot co-occur with a pattern label")
        object.__setattr__(self, "labels", labels)

    def __setattr__(self, name, value):
        raise AttributeError("LabelSet is immutable")

    def __reduce__(self):
        return (LabelSet, (tuple(self),))

    def __iter__(self):
        return iter(label for label in CLASS_LABELS if label in self.labels)

    def __contains__(self, label):
        return label in self.labels

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        return isinstance(other, LabelSet) and self.labels == other.labels

    def __hash__(self):
        return hash(self.labels)

    def __str__(self):
        return "|".join(self)

    def __repr__(self):
        return f"LabelSet({str(self)!r})"

    @property
    def primary(self):
        """First label in canonical class order."""

        return next(iter(self))


def downsample_first_per_job(records):
    """Keep only the first record (smallest t) of every print job."""

    records = list(records)
    if not records:
        raise EmptyLog("no records to downsample")
    first = {}
    for record in records:
        kept = first.get(record.job_id)
        if kept is None or record.t < kept.t:
            first[record.job_id] = record
    kept_ids = {id(record) for record in first.values()}
    head_id = records[0].head_id
    return NozzleLog(head_id, tuple(r for r in records if id(r) in kept_ids))

def last_jobs(log, n=run_init_values["last_jobs"]):
    """Return the log restricted to its last ``n`` print jobs."""

    validate_range("last_jobs", n, lifetime_ranges)
    jobs = []
    for record in log.records:
        if not jobs or jobs[-1] != record.job_id:
            jobs.append(record.job_id)
    window = set(jobs[-n:])
    return NozzleLog(log.head_id, tuple(r for r in log.records if r.job_id in window))

def to_count_series(log):
    """Count failed nozzles per NFC type at every time-step of the log."""

    states = np.stack([record.grid.states.ravel() for record in log.records])
    codes = np.arange(1, NUM_CHANNELS + 1, dtype=np.uint8)
    channels = (states[None, :, :] == codes[:, None, None]).sum(axis=2)
    return CountSeries(log.head_id, channels)

def grid_summary(grid):
    """Return failed-nozzle counts keyed by NFC name."""

    return {state.name: int(count) for state, count in
        zip(FAILURE_STATES, grid.channel_counts())}

def render_grid(grid):
    """Text view of a grid: '.' for a working nozzle, the NFC digit otherwise."""

    symbols = np.array(list(".12345"))
    return "\n".join("".join(row) for row in symbols[grid.states])
