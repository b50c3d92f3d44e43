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
import re
from pathlib import Path

import numpy as np
import pandas as pd

from evaluation import ClassScores, EvalReport
from helpers.jobs import run_jobs
from printhead_logs import (CLASS_LABELS, EmptyLog, GRID_CELLS, LabelSet, LogRecord,
    NozzleGrid, NozzleLog, ParseError, SchemaError)

__all__ = ["encode_grid", "decode_grid", "encode_log", "decode_log",
    "manifest_to_csv", "manifest_from_csv", "write_dataset", "read_dataset",
    "write_matrix", "read_matrix", "report_to_csv", "report_from_csv",
    "report_to_display", "comparison_to_csv", "comparison_to_display"]

logger = logging.getLogger(__name__)

LOGS_DIR = "logs"
LOG_SUFFIX = ".log"
MANIFEST_FILE = "manifest.csv"

_SYMBOLS = "E12345"
_RUN = re.compile(r"([E1-5]):?([0-9]+)")
_INTEGER = re.compile(r"[0-9]+")


def encode_grid(grid):
    """Run-length encode a grid row-major as ``S:len`` runs."""

    cells = grid.states.ravel()
    edges = np.flatnonzero(np.diff(cells)) + 1
    starts = np.concatenate(([0], edges))
    lengths = np.diff(np.concatenate((starts, [cells.size])))
    return ",".join(f"{_SYMBOLS[cells[s]]}:{n}" for s, n in zip(starts, lengths))

def decode_grid(text, line=None):
    """Parse ``S:len`` runs; a single ``E512`` style token is accepted too."""

    cells = []
    for token in text.strip().split(","):
        match = _RUN.fullmatch(token.strip())
        if not match or int(match[2]) == 0:
            raise ParseError(f"malformed run {token!r}", line)
        cells.extend([_SYMBOLS.index(match[1])] * int(match[2]))
    if len(cells) != GRID_CELLS:
        raise SchemaError(f"runs cover {len(cells)} cells, expected {GRID_CELLS}"
            + (f" (line {line})" if line is not None else ""))
    return NozzleGrid(cells)

def encode_log(log):
    """One ``head_id<TAB>job_id<TAB>t<TAB>RLE`` line per record."""

    return "".join(f"{r.head_id}\t{r.job_id}\t{r.t}\t{encode_grid(r.grid)}\n"
        for r in log.records)

def decode_log(text):
    records = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ParseError(f"expected 4 tab-separated fields, got {len(fields)}", number)
        head_id, job_id, t, runs = fields
        if not _INTEGER.fullmatch(job_id) or not _INTEGER.fullmatch(t):
            raise ParseError("job_id and t must be non-negative integers", number)
        records.append(LogRecord(head_id, int(job_id), int(t), decode_grid(runs, number)))
    if not records:
        raise EmptyLog("log file has no records")
    return NozzleLog(records[0].head_id, records)

def _read_csv(path, **kwargs):
    try:
        return pd.read_csv(path, **kwargs)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise ParseError(f"{path}: {err}") from err

def manifest_to_csv(manifest):
    """Manifest as ``head_id,labels`` CSV text, rows sorted by head id."""

    df = pd.DataFrame({"head_id": sorted(manifest),
        "labels": [str(manifest[h]) for h in sorted(manifest)]})
    return df.to_csv(index=False, lineterminator="\n")

def manifest_from_csv(path):
    df = _read_csv(path, dtype=str, keep_default_na=False)
    if list(df.columns) != ["head_id", "labels"]:
        raise ParseError(f"{path}: manifest header must be 'head_id,labels'", 1)
    if df["head_id"].duplicated().any():
        raise SchemaError(f"{path}: duplicate head ids in manifest")
    return {head_id: LabelSet(labels) for head_id, labels in zip(df["head_id"], df["labels"])}

def _write_log(log, directory):
    (directory / f"{log.head_id}{LOG_SUFFIX}").write_text(encode_log(log))

def write_dataset(logs, manifest, data_dir, n_jobs=1):
    """Write ``logs/<head_id>.log`` files and ``manifest.csv`` under ``data_dir``."""

    data_dir = Path(data_dir)
    log_dir = data_dir / LOGS_DIR
    log_dir.mkdir(parents=True, exist_ok=True)
    run_jobs(_write_log, [(log, log_dir) for log in logs], n_jobs)
    (data_dir / MANIFEST_FILE).write_text(manifest_to_csv(manifest))

def read_log_file(path):
    try:
        return decode_log(Path(path).read_text())
    except ParseError as err:
        raise ParseError(f"{path}: {err}") from err

def read_dataset(data_dir, n_jobs=1):
    """Raw logs (sorted by head id) and the manifest of a data directory."""

    data_dir = Path(data_dir)
    manifest = manifest_from_csv(data_dir / MANIFEST_FILE)
    paths = [data_dir / LOGS_DIR / f"{head_id}{LOG_SUFFIX}" for head_id in sorted(manifest)]
    missing = [p for p in paths if not p.exists()]
    if missing:
        raise SchemaError(f"{len(missing)} heads in the manifest have no log, "
            f"e.g. {missing[0]}")
    logs = run_jobs(read_log_file, [(p,) for p in paths], n_jobs)
    logger.info("Read %d logs from %s", len(logs), data_dir)
    return logs, manifest

def write_matrix(matrix, path):
    """Feature matrix CSV; 17 significant digits keep floats exact."""

    matrix.to_csv(path, float_format="%.17g", na_rep="NaN", lineterminator="\n")

def read_matrix(path):
    df = _read_csv(path, dtype={"head_id": str}, float_precision="round_trip")
    if df.columns[0] != "head_id":
        raise ParseError(f"{path}: first column must be head_id", 1)
    return df.set_index("head_id").astype(float)

def report_to_csv(report):
    """Long-format ``record,key,label,value`` table; floats written with repr."""

    rows = [("meta", "model", "", report.model), ("meta", "seed", "", str(report.seed)),
        ("meta", "catalog_digest", "", report.catalog_digest),
        ("meta", "dataset_digest", "", report.dataset_digest),
        ("meta", "excluded", "", "|".join(report.excluded)),
        ("meta", "n_heads", "", str(report.n_heads))]
    for label, scores in report.per_class.items():
        rows.extend(("class", key, label, repr(value)) for key, value in vars(scores).items())
    rows.extend(("weighted", key, "", repr(value)) for key, value in report.weighted.items())
    for true, counts in zip(CLASS_LABELS, report.confusion):
        rows.extend(("confusion", true, pred, str(v)) for pred, v in zip(CLASS_LABELS, counts))
    rows.extend(("misclassified", head_id, "", "") for head_id in report.misclassified)
    rows.extend(("warning", str(i), "", message) for i, message in enumerate(report.warnings))
    df = pd.DataFrame(rows, columns=["record", "key", "label", "value"])
    return df.to_csv(index=False, lineterminator="\n")

def report_from_csv(path):
    df = _read_csv(path, dtype=str, keep_default_na=False)
    if list(df.columns) != ["record", "key", "label", "value"]:
        raise ParseError(f"{path}: not a report CSV", 1)
    meta = {k: v for r, k, v in zip(df["record"], df["key"], df["value"]) if r == "meta"}
    per_class = {label: {} for label in CLASS_LABELS}
    weighted = {}
    confusion = np.zeros((len(CLASS_LABELS), len(CLASS_LABELS)), dtype=int)
    misclassified, warnings = [], []
    for record, key, label, value in df.itertuples(index=False):
        if record == "class":
            per_class[label][key] = float(value) if key in ("precision", "recall", "f1") \
                else int(value)
        elif record == "weighted":
            weighted[key] = int(value) if key == "support" else float(value)
        elif record == "confusion":
            confusion[CLASS_LABELS.index(key), CLASS_LABELS.index(label)] = int(value)
        elif record == "misclassified":
            misclassified.append(key)
        elif record == "warning":
            warnings.append(value)
    try:
        return EvalReport(model=meta["model"], seed=int(meta["seed"]),
            catalog_digest=meta["catalog_digest"], dataset_digest=meta["dataset_digest"],
            excluded=tuple(e for e in meta["excluded"].split("|") if e),
            per_class={label: ClassScores(**scores) for label, scores in per_class.items()},
            weighted=weighted,
            confusion=tuple(tuple(int(v) for v in row) for row in confusion),
            misclassified=tuple(misclassified), n_heads=int(meta["n_heads"]),
            warnings=tuple(warnings))
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"{path}: incomplete report ({err})")

def report_to_display(report):
    """One summary line for the terminal."""

    return (f"model={report.model} weighted_f1={report.weighted['f1']:.4f} "
        f"misclassified={report.n_misclassified}/{report.n_heads}")

def comparison_to_csv(comparison):
    return comparison.table.to_csv(float_format="%.17g", lineterminator="\n")

def comparison_to_display(comparison):
    """Weighted-row summary for the terminal."""

    weighted = comparison.table.loc["weighted"]
    return (f"{comparison.a}: weighted_f1={weighted['a_f1']:.4f} "
        f"misclassified={comparison.misclassified['a']}\n"
        f"{comparison.b}: weighted_f1={weighted['b_f1']:.4f} "
        f"misclassified={comparison.misclassified['b']}")
