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

from app import main
from helpers.formatting import report_from_csv

def test_baseline_report(capsys, featured_config, tmp_path):
    """Test the shipped rules produce a scored baseline report."""

    assert main(["baseline", "--config", str(featured_config)]) == 0

    report = report_from_csv(tmp_path / "out" / "baseline_report.csv")
    assert report.model == "baseline"
    assert report.n_heads == 27
    assert sum(map(sum, report.confusion)) >= 28
    assert capsys.readouterr().out.splitlines()[-1].startswith("model=baseline")

def test_baseline_custom_rules(featured_config, tmp_path):

    rules = tmp_path / "rules.txt"
    rules.write_text("10 | Pattern1 | ch1__final_value >= 0\n")

    assert main(["baseline", "--config", str(featured_config), "--rules", str(rules)]) == 0
    report = report_from_csv(tmp_path / "out" / "baseline_report.csv")
    assert report.per_class["Pattern1"].recall == 1.0
    assert report.per_class["Other"].recall == 0.0

def test_baseline_rule_errors(featured_config, tmp_path, capsys):

    rules = tmp_path / "rules.txt"
    rules.write_text("# header\n10 | Pattern1 | no_such_feature > 1\n")

    assert main(["baseline", "--config", str(featured_config), "--rules", str(rules)]) == 2
    assert "line 2" in capsys.readouterr().err

def test_baseline_missing_rules(featured_config, tmp_path):

    assert main(["baseline", "--config", str(featured_config), "--rules",
        str(tmp_path / "none.txt")]) == 2
