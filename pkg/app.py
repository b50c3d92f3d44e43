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

import argparse
import hashlib
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from time import perf_counter

import yaml

from baseline_rules import apply_rules, load_rules
from classifiers import ModelSpec, TREE_MODELS, model_summary
from evaluation import (align_dataset, build_report, compare_reports, cross_validate,
    fit_full, importance_report, kfold_tune, loocv, stratified_folds)
from features import default_catalog, extract_matrix, load_catalog
from helpers import artifacts, formatting, graphics, layout
from helpers.jobs import elapsed, job_exit
from helpers.tool_tips import command_tips, tool_tips
from printhead_logs import (CLASS_LABELS, ConfigError, OTHER, PrintheadError, SchemaError,
    downsample_first_per_job, lifetime_ranges, run_init_values, run_ranges,
    selector_init_values, selector_ranges, validate_range)
from synthetic_logs import generate_dataset, load_dataset_spec

logger = logging.getLogger(__name__)

RUN_CONFIG_FILE = Path(__file__).parent / "assets" / "run_config.yaml"
FEATURES_FILE = "features.csv"
DIGEST_FILE = "catalog.sha256"
BASELINE = "baseline"
LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


@dataclass(frozen=True)
class RunConfig:
    seed: int
    data: Path
    out: Path
    dataset: Path
    rules: Path
    catalog: object
    folds: int = run_init_values["folds"]
    n_jobs: int = run_init_values["n_jobs"]
    exclude_classes: tuple = ()
    selector: dict = field(default_factory=lambda: dict(selector_init_values))
    models: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    model: str = "ovr-rf"
    loocv: bool = False
    params: dict = field(default_factory=dict)
    grid: str = "default"

    def model_spec(self):
        parsed = ModelSpec.parse(self.model)
        return ModelSpec(parsed.name, {**self.models.get(parsed.name, {}), **self.params},
            parsed.ovr)

    def catalog_object(self):
        return default_catalog() if self.catalog == "default" else load_catalog(self.catalog)


def _existing(path, key):
    if not Path(path).is_file():
        raise ConfigError(f"{key} file {path} does not exist")
    return Path(path)

def load_config(args):
    """Merge the run configuration file with command-line overrides."""

    config_path = Path(args.config)
    with open(config_path) as f:
        values = yaml.safe_load(f) or {}
    if not isinstance(values, dict):
        raise ConfigError(f"{config_path}: run configuration must be a mapping")
    base = config_path.parent

    for key in ("seed", "data", "out", "folds", "model", "grid"):
        if getattr(args, key, None) is not None:
            values[key] = getattr(args, key)
    if getattr(args, "jobs", None) is not None:
        values["n_jobs"] = args.jobs
    if getattr(args, "exclude_class", None):
        values["exclude_classes"] = args.exclude_class
    if values.get("seed") is None:
        raise ConfigError("no seed configured; set 'seed' or pass --seed")

    seed = validate_range("seed", int(values["seed"]), run_ranges)
    folds = validate_range("folds", int(values.get("folds", run_init_values["folds"])),
        run_ranges)
    n_jobs = validate_range("n_jobs", int(values.get("n_jobs", run_init_values["n_jobs"])),
        run_ranges)
    if n_jobs == 0:
        raise ConfigError("n_jobs must be -1 or positive")

    excluded = tuple(values.get("exclude_classes") or ())
    unknown = set(excluded) - set(CLASS_LABELS)
    if unknown:
        raise ConfigError(f"unknown classes to exclude: {sorted(unknown)}")

    selector = {**selector_init_values, **(values.get("selector") or {})}
    for key, value in selector.items():
        if key not in selector_ranges:
            raise ConfigError(f"unknown selector setting {key!r}")
        validate_range(key, value, selector_ranges)

    # Command-line paths resolve against the working directory
    rules = Path(args.rules) if getattr(args, "rules", None) else \
        base / values.get("rules", "default_rules.txt")
    catalog = values.get("catalog", "default")
    if catalog != "default":
        catalog = _existing(base / catalog, "catalog")

    params = {}
    if getattr(args, "params", None):
        with open(args.params) as f:
            params = yaml.safe_load(f) or {}
        if not isinstance(params, dict):
            raise ConfigError(f"{args.params}: parameters must be a mapping")

    config = RunConfig(seed=seed, data=Path(values.get("data", "data")),
        out=Path(values.get("out", "out")),
        dataset=_existing(base / values.get("dataset", "dataset_spec.yaml"), "dataset"),
        rules=_existing(rules, "rules"), catalog=catalog, folds=folds, n_jobs=n_jobs,
        exclude_classes=excluded, selector=selector, models=values.get("models") or {},
        grids=values.get("grids") or {}, model=values.get("model", "ovr-rf"),
        loocv=bool(getattr(args, "loocv", False)), params=params,
        grid=values.get("grid") or "default")
    config.model_spec()
    return config


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info("Wrote %s", path)

def _load_features(config):
    matrix = formatting.read_matrix(config.data / FEATURES_FILE)
    digest = (config.data / DIGEST_FILE).read_text().strip()
    if hashlib.sha256(",".join(matrix.columns).encode()).hexdigest() != digest:
        raise SchemaError(f"feature matrix columns do not match {config.data / DIGEST_FILE}")
    manifest = formatting.manifest_from_csv(config.data / formatting.MANIFEST_FILE)
    matrix, labels = align_dataset(matrix, manifest)
    return matrix, labels, digest

def _write_report(config, stem, report):
    _write(config.out / f"{stem}_report.md", layout.report_to_markdown(report))
    _write(config.out / f"{stem}_report.csv", formatting.report_to_csv(report))
    _write(config.out / f"{stem}_confusion.svg",
        graphics.confusion_to_svg(report.confusion, report.model))

def cmd_generate(config):
    start = perf_counter()
    spec = load_dataset_spec(config.dataset, config.seed)
    logs, manifest = generate_dataset(spec, config.n_jobs)
    formatting.write_dataset(logs, manifest, config.data, config.n_jobs)
    logger.info("Generated dataset in %s s", elapsed(start))
    print(f"heads={len(logs)} labels={sum(len(labels) for labels in manifest.values())}")
    return job_exit["COMPLETED"]

def cmd_features(config):
    start = perf_counter()
    catalog = config.catalog_object()
    logs, _ = formatting.read_dataset(config.data, config.n_jobs)
    matrix = extract_matrix([downsample_first_per_job(log.records) for log in logs],
        catalog, config.n_jobs)
    config.data.mkdir(parents=True, exist_ok=True)
    formatting.write_matrix(matrix, config.data / FEATURES_FILE)
    _write(config.data / DIGEST_FILE, catalog.digest + "\n")
    logger.info("Feature extraction took %s s", elapsed(start))
    print(f"heads={matrix.shape[0]} features={matrix.shape[1]} catalog={catalog.digest[:12]}")
    return job_exit["COMPLETED"]

def cmd_tune(config):
    matrix, labels, digest = _load_features(config)
    spec = config.model_spec()
    grids = config.grids.get(spec.name, {})
    if config.grid not in grids:
        raise ConfigError(f"no grid {config.grid!r} for model {spec.name}")
    exclude = tuple(dict.fromkeys((OTHER,) + config.exclude_classes))
    best, table = kfold_tune(matrix, labels, spec, grids[config.grid], config.folds,
        config.seed, config.selector, exclude, config.n_jobs)
    stem = f"{spec.label}_tuning"
    _write(config.out / f"{spec.label}_best_params.yaml",
        yaml.safe_dump(best, sort_keys=True))
    _write(config.out / f"{stem}.csv",
        table.to_csv(index=False, float_format="%.17g", lineterminator="\n"))
    _write(config.out / f"{stem}.md", layout.cv_table_to_markdown(table, best, spec.label))
    print(f"model={spec.label} best={best}")
    return job_exit["COMPLETED"]

def cmd_evaluate(config):
    matrix, labels, digest = _load_features(config)
    spec = config.model_spec()
    arguments = (matrix, labels, spec)
    if config.loocv:
        report = loocv(*arguments, config.seed, config.selector, config.exclude_classes,
            digest, config.n_jobs)
    else:
        report = cross_validate(*arguments, stratified_folds(labels, config.folds,
            config.seed), config.seed, config.selector, config.exclude_classes, digest,
            config.n_jobs)
    for warning in report.warnings:
        logger.warning(warning)
    _write_report(config, spec.label, report)

    pipeline, model = fit_full(matrix, labels, spec, config.seed, config.selector, digest,
        allow_missing=True, n_jobs=config.n_jobs)
    _write(config.out / f"{spec.label}_pipeline.txt", artifacts.pipeline_to_text(pipeline))
    _write(config.out / f"{spec.label}_model.txt", artifacts.model_to_text(model))
    if spec.name in TREE_MODELS:
        tables = importance_report(model, pipeline.selected_columns)
        _write(config.out / f"{spec.label}_importance.md",
            layout.importance_to_markdown(tables, spec.label))
        _write(config.out / f"{spec.label}_trees.yaml",
            yaml.safe_dump(model_summary(model), sort_keys=True))
    print(formatting.report_to_display(report))
    return job_exit["COMPLETED"]

def cmd_baseline(config):
    matrix, labels, digest = _load_features(config)
    ruleset = load_rules(config.rules, matrix.columns)
    predictions = apply_rules(ruleset, matrix)
    report = build_report(BASELINE, list(matrix.index), labels, predictions, config.seed,
        digest, config.exclude_classes)
    _write_report(config, BASELINE, report)
    print(formatting.report_to_display(report))
    return job_exit["COMPLETED"]

def cmd_compare(config, report_a, report_b):
    comparison = compare_reports(formatting.report_from_csv(report_a),
        formatting.report_from_csv(report_b))
    _write(config.out / "comparison.md", layout.comparison_to_markdown(comparison))
    _write(config.out / "comparison.csv", formatting.comparison_to_csv(comparison))
    print(formatting.comparison_to_display(comparison))
    return job_exit["COMPLETED"]

def cmd_inspect(config, head_id, last_n=None):
    if last_n is None:
        last_n = run_init_values["last_jobs"]
    validate_range("last_jobs", last_n, lifetime_ranges)
    path = config.data / formatting.LOGS_DIR / f"{head_id}{formatting.LOG_SUFFIX}"
    if not path.is_file():
        raise SchemaError(f"no log for head {head_id} in {config.data}")
    log = formatting.read_log_file(path)
    _write(config.out / f"{head_id}_head.md", layout.head_to_markdown(log, last_n))
    _write(config.out / f"{head_id}_head.svg", graphics.head_to_svg(log, last_n))
    print(f"head={head_id} records={len(log)} failed={log.terminal.failed_count()}")
    return job_exit["COMPLETED"]

def cmd_run(config):
    config = replace(config, loocv=True)
    for command in (cmd_generate, cmd_features, cmd_evaluate, cmd_baseline):
        command(config)
    label = config.model_spec().label
    return cmd_compare(config, config.out / f"{BASELINE}_report.csv",
        config.out / f"{label}_report.csv")


commands = {"generate": cmd_generate, "features": cmd_features, "tune": cmd_tune,
    "evaluate": cmd_evaluate, "baseline": cmd_baseline, "compare": cmd_compare,
    "inspect": cmd_inspect, "run": cmd_run}

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=str(RUN_CONFIG_FILE), help=tool_tips["config"])
    common.add_argument("--seed", type=int, help=tool_tips["seed"])
    common.add_argument("--data", help=tool_tips["data"])
    common.add_argument("--out", help=tool_tips["out"])
    common.add_argument("--jobs", type=int, help=tool_tips["jobs"])
    common.add_argument("--exclude-class", action="append", choices=CLASS_LABELS,
        help=tool_tips["exclude_class"])
    common.add_argument("--log-level", default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help=tool_tips["log_level"])

    parser = argparse.ArgumentParser(prog="app.py",
        description="Failure-mechanism classification of printhead nozzle logs.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    sub = {name: subparsers.add_parser(name, parents=[common], help=command_tips[name])
        for name in commands}
    for name in ("tune", "evaluate", "run"):
        sub[name].add_argument("--model", help=tool_tips["model"])
    for name in ("tune", "evaluate"):
        sub[name].add_argument("--folds", type=int, help=tool_tips["folds"])
    for name in ("baseline", "run"):
        sub[name].add_argument("--rules", help=tool_tips["rules"])
    sub["evaluate"].add_argument("--loocv", action="store_true", help=tool_tips["loocv"])
    sub["evaluate"].add_argument("--params", help=tool_tips["params"])
    sub["tune"].add_argument("--grid", help=tool_tips["grid"])
    sub["compare"].add_argument("report_a", help=tool_tips["report_a"])
    sub["compare"].add_argument("report_b", help=tool_tips["report_b"])
    sub["inspect"].add_argument("--head", required=True, help=tool_tips["head"])
    sub["inspect"].add_argument("--last-jobs", type=int, help=tool_tips["last_jobs"])
    return parser

def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT, stream=sys.stderr,
        force=True)
    try:
        config = load_config(args)
        if args.command == "compare":
            return cmd_compare(config, args.report_a, args.report_b)
        if args.command == "inspect":
            return cmd_inspect(config, args.head, args.last_jobs)
        return commands[args.command](config)
    except (PrintheadError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return job_exit["USAGE"]
    except Exception:
        logger.exception("Command %s failed", args.command)
        return job_exit["FAILED"]

if __name__ == "__main__":
    sys.exit(main())
