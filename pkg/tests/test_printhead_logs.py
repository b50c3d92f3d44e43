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

from collections import defaultdict
import pickle

import numpy as np
import pytest

from printhead_logs import (CountSeries, EmptyLog, GRID_CELLS, LabelSet, LogRecord,
    NozzleGrid, NozzleLog, SchemaError, channel_view, downsample_first_per_job,
    grid_summary, last_jobs, render_grid, to_count_series)

def _grid(cells=None):
    states = np.zeros(GRID_CELLS, dtype=np.uint8)
    for index, state in (cells or {}).items():
        states[index] = state
    return NozzleGrid(states)

def _records(jobs_and_times, head_id="PH0001"):
    return [LogRecord(head_id, job, t, NozzleGrid.empty()) for job, t in jobs_and_times]

def test_downsample_keeps_first_record_of_each_job():
    """Test that only the smallest-t record of every job is kept."""

    log = downsample_first_per_job(_records([(1, 0), (1, 1), (2, 2)]))

    assert [r.t for r in log.records] == [0, 2]

def test_downsample_single_record():

    records = _records([(4, 9)])

    assert downsample_first_per_job(records).records == tuple(records)

def test_downsample_matches_group_by_min():
    """Test downsampling against a brute-force group-by-min oracle."""

    rng = np.random.default_rng(11)
    times = np.sort(rng.choice(10000, 300, replace=False))
    records = _records([(int(t) // 1000, int(t)) for t in times])
    oracle = defaultdict(list)
    for r in records:
        oracle[r.job_id].append(r.t)

    log = downsample_first_per_job(records)

    assert sorted(r.t for r in log.records) == sorted(min(v) for v in oracle.values())
    assert downsample_first_per_job(log.records) == log

def test_downsample_empty_input():

    with pytest.raises(EmptyLog):
        downsample_first_per_job([])

@pytest.mark.parametrize("cells, counts", [
    ({}, [0, 0, 0, 0, 0]),
    ({0: 1, 1: 1, 2: 1, 511: 5}, [3, 0, 0, 0, 1])])
def test_count_series_direct(cells, counts):

    log = NozzleLog("PH0001", [LogRecord("PH0001", 0, 0, _grid(cells))])

    assert to_count_series(log).channels[:, 0].tolist() == counts

def test_count_series_matches_cell_tally():
    """Test per-step counts against a cell-by-cell tally."""

    rng = np.random.default_rng(5)
    grids = [NozzleGrid(rng.integers(0, 6, GRID_CELLS)) for _ in range(50)]
    log = NozzleLog("PH0002", [LogRecord("PH0002", t, t, g) for t, g in enumerate(grids)])

    series = to_count_series(log)

    for t, grid in enumerate(grids):
        tally = [0] * 5
        for value in grid.states.ravel().tolist():
            if value:
                tally[value - 1] += 1
        assert series.channels[:, t].tolist() == tally
        assert series.total()[t] == grid.failed_count() == channel_view(grid).sum()

def test_grid_rejects_bad_input():

    with pytest.raises(SchemaError):
        NozzleGrid(np.zeros((4, 127)))
    with pytest.raises(SchemaError):
        NozzleGrid(np.full(GRID_CELLS, 6))

def test_grid_is_immutable():

    grid = NozzleGrid.empty()

    with pytest.raises(ValueError):
        grid.states[0, 0] = 1
    with pytest.raises(AttributeError):
        grid.states = None

@pytest.mark.parametrize("value", [_grid({0: 4, 511: 1}), LabelSet("Pattern1|Pattern2"),
    LabelSet("Other")])
def test_immutable_types_pickle(value):
    """Test the immutable types survive the trip to a worker process."""

    restored = pickle.loads(pickle.dumps(value))

    assert restored == value
    assert repr(restored) == repr(value)
    with pytest.raises(AttributeError):
        restored.states = None

def test_log_rejects_unordered_or_mixed_records():

    with pytest.raises(SchemaError):
        NozzleLog("PH0001", _records([(0, 2), (0, 1)]))
    with pytest.raises(SchemaError):
        NozzleLog("PH0001", _records([(0, 0)], "PH0009"))
    with pytest.raises(EmptyLog):
        NozzleLog("PH0001", [])

def test_count_series_validation():

    with pytest.raises(SchemaError):
        CountSeries("PH0001", np.zeros((4, 3)))
    with pytest.raises(SchemaError):
        CountSeries("PH0001", np.full((5, 3), GRID_CELLS + 1))

def test_label_set_order_and_validation():

    labels = LabelSet(["Pattern2", "Pattern1"])

    assert str(labels) == "Pattern1|Pattern2"
    assert labels.primary == "Pattern1"
    assert LabelSet("Pattern2|Pattern1") == labels
    for bad in (["Pattern9"], [], ["Other", "Pattern1"]):
        with pytest.raises(SchemaError):
            LabelSet(bad)

def test_last_jobs_window():

    log = NozzleLog("PH0001", _records([(0, 0), (1, 1), (1, 2), (2, 3), (3, 4)]))

    window = last_jobs(log, 2)

    assert [r.job_id for r in window.records] == [2, 3]
    assert last_jobs(log, 100) == log

def test_grid_summary_and_render():

    grid = _grid({0: 4, 1: 4, 130: 2})

    assert grid_summary(grid) == {"NF1": 0, "NF2": 1, "NF3": 0, "NF4": 2, "NF5": 0}
    lines = render_grid(grid).splitlines()
    assert len(lines) == 4
    assert lines[0].startswith("44..")
    assert lines[1][2] == "2"
