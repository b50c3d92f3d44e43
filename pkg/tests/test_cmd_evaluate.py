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

from unittest.mock import patch

import pytest
import yaml

from app import main
from helpers.artifacts import model_from_text, pipeline_from_text
from helpers.formatting import report_from_csv
from printhead_logs import CLASS_LABELS

def test_evaluate_writes_report_and_artifacts(capsys, featured_config, tmp_path):
    """Test k-fold evaluation of an OVR decision tree end to end."""

    assert main(["evaluate", "--config", str(featured_config), "--model", "ovr-dt",
        "--folds", "3"]) == 0

    out = tmp_path / "out"
    report = report_from_csv(out / "ovr-dt_report.csv")
    assert report.model == "ovr-dt"
    assert report.n_heads == 27
    assert 0 <= report.weighted["f1"] <= 1
    assert (out / "ovr-dt_report.md").read_text().startswith("#")
    assert "<svg" in (out / "ovr-dt_confusion.svg").read_text()
    assert pipeline_from_text((out / "ovr-dt_pipeline.txt").read_text()).catalog_digest == \
        report.catalog_digest
    assert model_from_text((out / "ovr-dt_model.txt").read_text()).spec.name == "dt"
    assert (out / "ovr-dt_importance.md").exists()
    trees = yaml.safe_load((out / "ovr-dt_trees.yaml").read_text())
    assert set(trees) <= set(CLASS_LABELS)
    assert all(summary["n_trees"] == 1 for summary in trees.values())
    assert capsys.readouterr().out.splitlines()[-1].startswith("model=ovr-dt weighted_f1=")

def test_evaluate_knn_has_no_importance(featured_config, tmp_path):

    assert main(["evaluate", "--config", str(featured_config), "--model", "knn"]) == 0

    assert (tmp_path / "out" / "knn_report.csv").exists()
    assert not (tmp_path / "out" / "knn_importance.md").exists()
    assert not (tmp_path / "out" / "knn_trees.yaml").exists()

def test_evaluate_with_parameter_file(featured_config, tmp_path):

    params = tmp_path / "best.yaml"
    params.write_text("k: 1\n")

    assert main(["evaluate", "--config", str(featured_config), "--model", "ovr-knn",
        "--params", str(params)]) == 0
    model = model_from_text((tmp_path / "out" / "ovr-knn_model.txt").read_text())
    assert model.spec.params == {"k": 1}

def test_evaluate_excluded_class(featured_config, tmp_path):

    assert main(["evaluate", "--config", str(featured_config), "--model", "ovr-dt",
        "--exclude-class", "Other"]) == 0

    report = report_from_csv(tmp_path / "out" / "ovr-dt_report.csv")
    assert report.excluded == ("Other",)
    assert report.weighted["support"] == 23

@pytest.mark.parametrize("argv", [["--model", "svm"], ["--params", "missing.yaml"]])
def test_evaluate_usage_errors(featured_config, argv):

    assert main(["evaluate", "--config", str(featured_config)] + argv) == 2

def test_evaluate_without_features(run_config):

    assert main(["evaluate", "--config", str(run_config)]) == 2

@patch("app.graphics.confusion_to_svg", side_effect=RuntimeError("renderer crashed"))
def test_unexpected_failure_exit_code(mock_svg, featured_config):

    assert main(["evaluate", "--config", str(featured_config), "--model", "ovr-dt"]) == 1
    mock_svg.assert_called_once()

@pytest.mark.slow
def test_evaluate_loocv(featured_config, tmp_path):

    assert main(["evaluate", "--config", str(featured_config), "--model", "ovr-rf",
        "--loocv", "--jobs", "2"]) == 0
    assert report_from_csv(tmp_path / "out" / "ovr-rf_report.csv").n_heads == 27
