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

import pytest
import yaml

from app import main
from helpers.formatting import read_dataset

def test_generate_writes_dataset(run_config, tmp_path, capsys):
    """Test the small fleet is written with logs and a manifest."""

    assert main(["generate", "--config", str(run_config)]) == 0

    assert capsys.readouterr().out == "heads=27 labels=28\n"
    logs, manifest = read_dataset(tmp_path / "data")
    assert len(logs) == len(manifest) == 27
    assert (tmp_path / "data" / "logs" / "PH0001.log").exists()

def test_generate_seed_override(run_config, tmp_path):

    main(["generate", "--config", str(run_config)])
    first = (tmp_path / "data" / "logs" / "PH0003.log").read_text()
    main(["generate", "--config", str(run_config), "--seed", "43",
        "--data", str(tmp_path / "other")])

    assert (tmp_path / "other" / "logs" / "PH0003.log").read_text() != first

@pytest.mark.parametrize("change", [{"seed": None}, {"folds": 1}, {"n_jobs": 0},
    {"dataset": "missing.yaml"}, {"exclude_classes": ["Pattern9"]},
    {"selector": {"strength": -1}}, {"model": "ovr-svm"}])
def test_bad_configuration_is_usage_error(run_config, change, capsys):

    config = yaml.safe_load(run_config.read_text())
    config.update(change)
    run_config.write_text(yaml.safe_dump(config))

    assert main(["generate", "--config", str(run_config)]) == 2
    assert capsys.readouterr().err.startswith("error:")

def test_missing_config_file(tmp_path):

    assert main(["generate", "--config", str(tmp_path / "nope.yaml")]) == 2
