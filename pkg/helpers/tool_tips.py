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

from printhead_logs import (CLASS_LABELS, MODEL_NAMES, lifetime_ranges, run_init_values,
    run_ranges)

tool_tips = {"config":
"""Run configuration YAML. Dataset, rule and catalog paths inside it resolve
relative to the file's directory.""",
    "seed":
f"""Seed of every random choice in the run; all subsystem seeds derive from it.
[Range: {run_ranges['seed']}]""",
    "data":
"""Data directory holding logs/, manifest.csv and the feature matrix.""",
    "out":
"""Output directory for reports, heatmaps, tuned parameters and model files.""",
    "model":
f"""Base model, one of {', '.join(MODEL_NAMES)}. Prefix with 'ovr-' for
one-vs-rest multi-label classification (e.g. ovr-rf); without the prefix a
single-label model is trained on each head's primary label.""",
    "rules":
"""Baseline rule file: 'priority | label | predicate && ...' lines.""",
    "folds":
f"""Number of cross-validation folds for tuning and k-fold evaluation.
[Range: {run_ranges['folds']}]""",
    "exclude_class":
f"""Class left out of the weighted averages; repeat for several classes.
One of {', '.join(CLASS_LABELS)}.""",
    "loocv":
"""Evaluate with leave-one-out cross-validation instead of k folds.""",
    "params":
"""YAML file of model parameters, such as the output of the tune command.""",
    "grid":
"""Name of a tuning grid in the run configuration ('default' if omitted).""",
    "jobs":
f"""Worker processes (-1 for all cores); results do not depend on it.
[Range: {run_ranges['n_jobs']}, default {run_init_values['n_jobs']}]""",
    "log_level":
"""Logging threshold for messages on stderr.""",
    "report_a":
"""First report CSV to compare (for example the baseline).""",
    "report_b":
"""Second report CSV to compare.""",
    "head":
"""Head id to inspect, for example PH0001.""",
    "last_jobs":
f"""Number of final print jobs shown in the per-head view.
[Range: {lifetime_ranges['last_jobs']}, default {run_init_values['last_jobs']}]""",}

command_tips = {"generate": "Generate the synthetic printhead fleet (logs and manifest).",
    "features": "Extract the feature matrix from logs.",
    "tune": "Grid-search model parameters with stratified k-fold cross-validation.",
    "evaluate": "Evaluate a model by cross-validation and write report artifacts.",
    "baseline": "Evaluate the rule-based baseline and write report artifacts.",
    "compare": "Compare two report CSVs side by side.",
    "inspect": "Write the terminal grid and last-jobs failure counts of one head.",
    "run": "Run generate, features, evaluate, baseline and compare in order."}
