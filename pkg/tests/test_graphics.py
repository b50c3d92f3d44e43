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

import matplotlib.pyplot as plt
import numpy as np

from helpers.graphics import confusion_to_svg, head_to_svg, plot_confusion, plot_head

CONFUSION = np.diag([3, 4, 5, 6, 7, 8]) + np.eye(6, k=1, dtype=int)

def test_plot_confusion_annotates_cells():

    fig = plot_confusion(CONFUSION, title="ovr-rf")

    ax = fig.axes[0]
    values = [text.get_text() for text in ax.texts]
    assert len(values) == 36
    assert values[0] == "3" and values[1] == "1"
    assert ax.get_title() == "ovr-rf"
    assert [t.get_text() for t in ax.get_yticklabels()][-1] == "Other"
    plt.close(fig)

def test_svg_is_deterministic():

    first = confusion_to_svg(CONFUSION, "rules")
    second = confusion_to_svg(CONFUSION, "rules")

    assert first == second
    assert first.lstrip().startswith("<?xml")
    assert "<svg" in first

def test_svg_of_all_zero_matrix():

    assert "<svg" in confusion_to_svg(np.zeros((6, 6), dtype=int))

def test_plot_head_panels(small_dataset):
    """Test the terminal grid panel and one count line per failure type."""

    logs, _ = small_dataset
    log = logs[0]

    fig = plot_head(log, 20)

    grid_ax, count_ax = fig.axes[:2]
    assert grid_ax.images[0].get_array().shape == log.terminal.states.shape
    assert [line.get_label() for line in count_ax.get_lines()] == \
        ["NF1", "NF2", "NF3", "NF4", "NF5"]
    assert len(count_ax.get_lines()[0].get_xdata()) <= 20
    assert grid_ax.get_title() == f"{log.head_id}: terminal grid"
    plt.close(fig)

def test_head_svg_is_deterministic(small_dataset):

    logs, _ = small_dataset

    assert head_to_svg(logs[1]) == head_to_svg(logs[1])
