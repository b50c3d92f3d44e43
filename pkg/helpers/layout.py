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

from printhead_logs import (CLASS_LABELS, FAILURE_STATES, downsample_first_per_job,
    grid_summary, last_jobs, render_grid, run_init_values, to_count_series)

__all__ = ["markdown_table", "report_to_markdown", "comparison_to_markdown",
    "importance_to_markdown", "cv_table_to_markdown",
    "description_report", "description_confusion", "description_comparison",
    "description_importance", "description_tuning", "head_to_markdown",
    "description_head"]

description_report = """Per-class precision, recall and F1 over every head, with
averages weighted by class support. A head counts as misclassified when its
predicted label set differs from its true label set."""

description_confusion = """Rows are true classes, columns predicted classes. A
head with two true labels adds to two rows, so row sums can exceed the class
support."""

description_comparison = """Scores of both models on the same heads; deltas are
second minus first, and the winner column names the model with the higher F1
("=" on ties)."""

description_importance = """Features ranked by mean decrease in Gini impurity
in each class's one-vs-rest scorer, fitted on all heads."""

description_tuning = """Mean and spread of the per-fold weighted F1 for every
grid entry; the earliest entry wins ties."""

description_head = """Terminal grid: '.' marks a working nozzle, a digit the failure type of a
failed one. The job table counts failed nozzles per type in the first record of
each of the last jobs before removal."""


def _cell(value):
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)

def markdown_table(header, rows):
    """Pipe table from a header and rows of values."""

    lines = ["| " + " | ".join(map(str, header)) + " |",
        "|" + "|".join("---" for _ in header) + "|"]
    lines.extend("| " + " | ".join(map(_cell, row)) + " |" for row in rows)
    return "\n".join(lines)

def report_to_markdown(report):
    excluded = ", ".join(report.excluded) or "none"
    rows = [(label, s.precision, s.recall, s.f1, s.support)
        for label, s in report.per_class.items()]
    w = report.weighted
    rows.append(("**Weighted avg.**", w["precision"], w["recall"], w["f1"], w["support"]))
    sections = [f"# Evaluation report: {report.model}", "",
        f"- Seed: {report.seed}",
        f"- Catalog digest: `{report.catalog_digest}`",
        f"- Dataset digest: `{report.dataset_digest}`",
        f"- Excluded from averages: {excluded}",
        f"- Misclassified heads: {report.n_misclassified} of {report.n_heads}", "",
        description_report, "",
        markdown_table(("Class", "Prec.", "Rec.", "F1", "Support"), rows), "",
        "## Confusion matrix", "", description_confusion, "",
        markdown_table(("True \\ Predicted",) + CLASS_LABELS,
            [(label,) + tuple(row) for label, row in zip(CLASS_LABELS, report.confusion)])]
    if report.warnings:
        sections += ["", "## Warnings", ""] + [f"- {w}" for w in report.warnings]
    return "\n".join(sections) + "\n"

def comparison_to_markdown(comparison):
    rows = [(label, r.a_precision, r.a_recall, r.a_f1, r.b_precision, r.b_recall, r.b_f1,
        r.delta_f1, r.support, r.winner) for label, r in comparison.table.iterrows()]
    header = ("Class", f"{comparison.a} Prec.", f"{comparison.a} Rec.", f"{comparison.a} F1",
        f"{comparison.b} Prec.", f"{comparison.b} Rec.", f"{comparison.b} F1",
        "Delta F1", "Support", "Winner")
    return "\n".join([f"# Comparison: {comparison.a} vs {comparison.b}", "",
        description_comparison, "", markdown_table(header, rows), "",
        f"- Misclassified heads, {comparison.a}: {comparison.misclassified['a']}",
        f"- Misclassified heads, {comparison.b}: {comparison.misclassified['b']}"]) + "\n"

def importance_to_markdown(tables, model=""):
    sections = [f"# Feature importance {model}".rstrip(), "", description_importance]
    for label, table in tables.items():
        sections += ["", f"## {label}", "", markdown_table(("Rank", "Feature", "Weight"),
            [(rank, row.feature, row.weight) for rank, row in table.iterrows()])]
    return "\n".join(sections) + "\n"

def cv_table_to_markdown(table, best, model=""):
    return "\n".join([f"# Tuning {model}".rstrip(), "", description_tuning, "",
        f"Best parameters: {best}", "",
        markdown_table(list(table.columns), table.itertuples(index=False))]) + "\n"

def head_to_markdown(log, last_n=run_init_values["last_jobs"]):
    window = downsample_first_per_job(last_jobs(log, last_n).records)
    series = to_count_series(window)
    counts = grid_summary(log.terminal)
    names = [state.name for state in FAILURE_STATES]
    totals = series.total()
    rows = [(record.job_id,) + tuple(int(c) for c in series.channels[:, i]) +
        (int(totals[i]),) for i, record in enumerate(window.records)]
    return "\n".join([f"# Printhead {log.head_id}", "",
        f"- Records: {len(log)}",
        f"- Failed nozzles at removal: {sum(counts.values())}", "",
        description_head, "",
        "## Terminal grid", "",
        markdown_table(names, [[counts[name] for name in names]]), "",
        "```", render_grid(log.terminal), "```", "",
        f"## Last {len(window)} jobs", "",
        markdown_table(["Job"] + names + ["Total"], rows)]) + "\n"
