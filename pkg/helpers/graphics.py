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

import io
import logging

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.colors import LinearSegmentedColormap, ListedColormap, Normalize
import numpy as np

from printhead_logs import (CLASS_LABELS, FAILURE_STATES, GRID_ROWS, NUM_CHANNELS,
    downsample_first_per_job, last_jobs, run_init_values, to_count_series)

__all__ = ["plot_confusion", "confusion_to_svg", "plot_head", "head_to_svg"]

logging.getLogger("matplotlib").setLevel(logging.WARNING)

HEATMAP_COLORS = LinearSegmentedColormap.from_list("confusion", ["#ffffff", "#d7301f"])
# Working nozzle, then NF1..NF5
NOZZLE_COLORS = ListedColormap(["#ffffff", "#d7301f", "#fc8d59", "#4575b4", "#1a9850",
    "#762a83"], name="nozzles")

# Fixed salt and no date keep SVG bytes identical across runs
_SVG_RC = {"svg.hashsalt": "printhead-figures", "svg.fonttype": "path"}


def _svg_text(plot, *args):
    with plt.rc_context(_SVG_RC):
        fig = plot(*args)
        buffer = io.StringIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buffer.getvalue()


def plot_confusion(confusion, title=""):
    """Heatmap of a confusion matrix, red intensity proportional to count."""

    counts = np.asarray(confusion, dtype=int)
    fig, ax = plt.subplots(figsize=(6, 5))
    norm = Normalize(vmin=0, vmax=max(1, int(counts.max())))
    ax.imshow(counts, cmap=HEATMAP_COLORS, norm=norm)
    for (row, col), value in np.ndenumerate(counts):
        ax.text(col, row, str(value), ha="center", va="center",
            color="white" if norm(value) > 0.6 else "black", fontsize=9)

    ticks = np.arange(len(CLASS_LABELS))
    ax.set_xticks(ticks, labels=CLASS_LABELS, rotation=45, ha="right")
    ax.set_yticks(ticks, labels=CLASS_LABELS)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig

def confusion_to_svg(confusion, title=""):
    """SVG text of the heatmap, free of timestamps."""

    return _svg_text(plot_confusion, confusion, title)

def plot_head(log, last_n=run_init_values["last_jobs"]):
    """Terminal nozzle grid above the per-NFC failed counts of the last jobs.

    Counts use the first record of every job in the window, the same view the
    feature extractor sees.
    """

    window = downsample_first_per_job(last_jobs(log, last_n).records)
    series = to_count_series(window)
    jobs = [record.job_id for record in window.records]

    fig, (grid_ax, count_ax) = plt.subplots(2, 1, figsize=(10, 6),
        gridspec_kw={"height_ratios": [1, 2]})
    grid_ax.imshow(log.terminal.states, cmap=NOZZLE_COLORS, vmin=0, vmax=NUM_CHANNELS,
        aspect="auto", interpolation="nearest")
    grid_ax.set_yticks(np.arange(GRID_ROWS))
    grid_ax.set_xlabel("Nozzle column")
    grid_ax.set_ylabel("Row")
    grid_ax.set_title(f"{log.head_id}: terminal grid")

    for state, counts in zip(FAILURE_STATES, series.channels):
        count_ax.step(jobs, counts, where="post", color=NOZZLE_COLORS.colors[state],
            label=state.name)
    count_ax.set_xlabel("Print job")
    count_ax.set_ylabel("Failed nozzles")
    count_ax.set_title(f"Last {len(jobs)} jobs")
    count_ax.legend(loc="upper left", ncol=NUM_CHANNELS, fontsize=8)
    fig.tight_layout()
    return fig

def head_to_svg(log, last_n=run_init_values["last_jobs"]):
    """SVG text of the per-head view, free of timestamps."""

    return _svg_text(plot_head, log, last_n)
