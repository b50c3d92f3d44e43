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

import yaml

from app import main
from features import default_catalog
from helpers.formatting import read_matrix

def test_features_written_with_digest(capsys, featured_config, tmp_path):

    matrix = read_matrix(tmp_path / "data" / "features.csv")

    assert matrix.shape == (27, 256)
    assert list(matrix.columns) == default_catalog().columns
    assert (tmp_path / "data" / "catalog.sha256").read_text().strip() == \
        default_catalog().digest
    assert capsys.readouterr().out.splitlines()[-1].startswith("heads=27 features=256")

def test_custom_catalog(run_config, tmp_path):

    (tmp_path / "catalog.yaml").write_text("- family: final_value\n- family: quantile\n"
        "  values: [0.5]\n")
    config = yaml.safe_load(run_config.read_text())
    config["catalog"] = "catalog.yaml"
    run_config.write_text(yaml.safe_dump(config))

    assert main(["generate", "--config", str(run_config)]) == 0
    assert main(["features", "--config", str(run_config)]) == 0
    assert read_matrix(tmp_path / "data" / "features.csv").shape == (27, 16)

def test_features_without_data(run_config):

    assert main(["features", "--config", str(run_config)]) == 2

def test_non_ascii_digit_in_log(run_config, tmp_path, capsys):
    """Test a superscript job id is a usage error naming the line."""

    assert main(["generate", "--config", str(run_config)]) == 0
    path = tmp_path / "data" / "logs" / "PH0001.log"
    lines = path.read_text().splitlines(keepends=True)
    fields = lines[2].split("\t")
    lines[2] = "\t".join([fields[0], "²"] + fields[2:])
    path.write_text("".join(lines))
    capsys.readouterr()

    assert main(["features", "--config", str(run_config)]) == 2
    assert "line 3:" in capsys.readouterr().err
