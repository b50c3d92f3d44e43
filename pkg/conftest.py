# Used instead of setting Python path for pytest file discovery
from pathlib import Path

import numpy as np
import pytest
import yaml

from app import main
from features import extract_matrix
from printhead_logs import LabelSet, downsample_first_per_job
from synthetic_logs import DatasetSpec, load_dataset_spec, generate_dataset

ASSETS = Path(__file__).parent / "assets"

def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
        help="run the full-benchmark tests")

def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-benchmark test, needs --runslow")

def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)

@pytest.fixture(scope="session")
def default_spec():

    return load_dataset_spec()

@pytest.fixture(scope="session")
def small_counts():

    return {"Pattern1": 5, "Pattern1|Pattern2": 1, "Pattern2": 4, "Pattern3": 4,
        "Pattern4": 4, "Pattern5": 4, "Other": 5}

@pytest.fixture(scope="session")
def small_spec(default_spec, small_counts):

    return DatasetSpec(class_counts=small_counts, seed=7, params=default_spec.params)

@pytest.fixture(scope="session")
def small_dataset(small_spec):

    return generate_dataset(small_spec)

@pytest.fixture(scope="session")
def small_matrix(small_dataset):
    """Feature matrix sorted by head id and the matching label sets."""

    logs, manifest = small_dataset
    matrix = extract_matrix([downsample_first_per_job(log.records) for log in logs])
    matrix = matrix.sort_index()
    return matrix, [manifest[head_id] for head_id in matrix.index]

@pytest.fixture
def twin_data():
    """Two well separated clusters of twin rows, one class each."""

    rng = np.random.default_rng(3)
    centers = np.array([[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]])
    x = np.vstack([centers[i % 2] + rng.normal(0, 0.3, 3) for i in range(12)])
    x = np.vstack([x, x])
    y = np.array([i % 2 for i in range(12)] * 2)
    return x, y

@pytest.fixture
def label_sets():

    return [LabelSet(text) for text in ("Pattern1", "Pattern1", "Pattern2",
        "Pattern1|Pattern2", "Other", "Pattern4")]

@pytest.fixture
def run_config(tmp_path, small_counts):
    """Run configuration for a small fleet, writing under ``tmp_path``."""

    spec = yaml.safe_load((ASSETS / "dataset_spec.yaml").read_text())
    spec["class_counts"] = small_counts
    (tmp_path / "dataset_spec.yaml").write_text(yaml.safe_dump(spec))
    config = yaml.safe_load((ASSETS / "run_config.yaml").read_text())
    config.update({"data": str(tmp_path / "data"), "out": str(tmp_path / "out"),
        "rules": str(ASSETS / "default_rules.txt"), "folds": 3})
    config["models"]["rf"]["n_trees"] = 5
    path = tmp_path / "run_config.yaml"
    path.write_text(yaml.safe_dump(config))
    return path

@pytest.fixture
def featured_config(run_config):
    """``run_config`` with its small fleet generated and featurized."""

    for command in ("generate", "features"):
        assert main([command, "--config", str(run_config)]) == 0
    return run_config
