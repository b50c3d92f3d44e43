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
import math
import operator
import re
from dataclasses import dataclass
from pathlib import Path

from features import default_catalog
from printhead_logs import LabelSet, OTHER, PATTERN_LABELS, PrintheadError, SchemaError

logger = logging.getLogger(__name__)

RULES_FILE = Path(__file__).parent / "assets" / "default_rules.txt"
MODES = ("first-match", "all-match")

comparators = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}

_COMPARE = re.compile(r"^([\w.]+)\s*(<=|>=|<|>)\s*(\S+)$")
_WITHIN = re.compile(r"^([\w.]+)\s+in\s*\[\s*([^,\]\s]+)\s*,\s*([^\]\s]+)\s*\]$")


class RuleConfigError(PrintheadError):
    """Invalid rule file content."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Predicate:
    column: str
    comparator: str
    value: object

    def holds(self, row):
        try:
            x = float(row[self.column])
        except KeyError:
            raise SchemaError(f"feature row has no column {self.column!r}")
        if math.isnan(x):
            return False
        if self.comparator == "in":
            low, high = self.value
            return low <= x <= high
        return comparators[self.comparator](x, self.value)

    def __str__(self):
        if self.comparator == "in":
            return f"{self.column} in[{self.value[0]:g},{self.value[1]:g}]"
        return f"{self.column} {self.comparator} {self.value:g}"


@dataclass(frozen=True)
class Rule:
    priority: int
    label: str
    predicates: tuple

    def satisfied(self, row):
        return all(predicate.holds(row) for predicate in self.predicates)

    def __str__(self):
        return f"{self.priority} | {self.label} | " + " && ".join(map(str, self.predicates))


@dataclass(frozen=True)
class RuleSet:
    """Rules ordered by priority (lowest number first); unmatched rows get ``default``."""

    rules: tuple
    mode: str = "all-match"
    default: str = OTHER

    def __post_init__(self):
        if not self.rules:
            raise RuleConfigError("rule set has no rules")
        if self.mode not in MODES:
            raise RuleConfigError(f"unknown mode {self.mode!r}; choose from {MODES}")
        priorities = [rule.priority for rule in self.rules]
        if len(set(priorities)) != len(priorities):
            raise RuleConfigError("rule priorities must be unique")
        object.__setattr__(self, "rules", tuple(sorted(self.rules, key=lambda r: r.priority)))

    @property
    def columns(self):
        return sorted({p.column for rule in self.rules for p in rule.predicates})

    def without(self, label):
        """Copy without the rules of ``label``."""

        return RuleSet(tuple(r for r in self.rules if r.label != label), self.mode, self.default)


def _number(text, line):
    try:
        value = float(text)
    except ValueError:
        raise RuleConfigError(f"invalid constant {text!r}", line)
    if math.isnan(value):
        raise RuleConfigError("NaN is not a valid constant", line)
    return value

def parse_predicate(text, line=None):
    text = text.strip()
    match = _WITHIN.match(text)
    if match:
        low, high = _number(match[2], line), _number(match[3], line)
        if low > high:
            raise RuleConfigError(f"empty range in {text!r}", line)
        return Predicate(match[1], "in", (low, high))
    match = _COMPARE.match(text)
    if match:
        return Predicate(match[1], match[2], _number(match[3], line))
    raise RuleConfigError(f"malformed predicate {text!r}", line)

def parse_rules(text, columns=None):
    """Parse rule-file text; predicates must reference ``columns`` when given."""

    known = None if columns is None else set(columns)
    rules = []
    mode = "first-match"
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if content.startswith("@"):
            directive = content[1:].split()
            if len(directive) != 2 or directive[0] != "mode":
                raise RuleConfigError(f"unknown directive {content!r}", number)
            mode = directive[1]
            if mode not in MODES:
                raise RuleConfigError(f"unknown mode {mode!r}", number)
            continue
        fields = [field.strip() for field in content.split("|")]
        if len(fields) != 3:
            raise RuleConfigError("expected 'priority | label | predicates'", number)
        try:
            priority = int(fields[0])
        except ValueError:
            raise RuleConfigError(f"invalid priority {fields[0]!r}", number)
        if fields[1] not in PATTERN_LABELS:
            raise RuleConfigError(f"rule label must be one of {PATTERN_LABELS}, "
                f"got {fields[1]!r}", number)
        predicates = tuple(parse_predicate(p, number) for p in fields[2].split("&&"))
        for predicate in predicates:
            if known is not None and predicate.column not in known:
                raise RuleConfigError(f"unknown feature column {predicate.column!r}", number)
        if priority in {rule.priority for rule in rules}:
            raise RuleConfigError(f"duplicate priority {priority}", number)
        rules.append(Rule(priority, fields[1], predicates))
    return RuleSet(tuple(rules), mode)

def load_rules(path, columns=None):
    with open(path) as f:
        ruleset = parse_rules(f.read(), columns)
    logger.info("Loaded %d rules (%s) from %s", len(ruleset.rules), ruleset.mode, path)
    return ruleset

def default_ruleset():
    """Shipped rule set, validated against the default catalog."""

    return load_rules(RULES_FILE, default_catalog().columns)

def evaluate_rules(ruleset, row):
    """Label set of one feature row."""

    labels = []
    for rule in ruleset.rules:
        if rule.satisfied(row):
            labels.append(rule.label)
            if ruleset.mode == "first-match":
                break
    return LabelSet(labels or [ruleset.default])

def apply_rules(ruleset, matrix):
    """Label set per row of a feature matrix, in row order."""

    missing = set(ruleset.columns) - set(matrix.columns)
    if missing:
        raise SchemaError(f"feature matrix lacks rule columns {sorted(missing)}")
    return [evaluate_rules(ruleset, row) for _, row in matrix.iterrows()]
