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

import hashlib
import json

import numpy as np

from classifiers import (ConstantScorer, DecisionTreeModel, ForestModel, KnnModel,
    LogRegModel, ModelSpec, MulticlassModel, OvrModel)
from pipeline import FittedPipeline, ImputeScale
from printhead_logs import ParseError

__all__ = ["ARTIFACT_VERSION", "pipeline_to_text", "pipeline_from_text",
    "model_to_text", "model_from_text"]

ARTIFACT_VERSION = 1

def _header(kind):
    return f"# printhead-failure-diagnostics {kind} artifact v{ARTIFACT_VERSION}\n"

def _split(text, kind):
    header, _, body = text.partition("\n")
    if header + "\n" != _header(kind):
        raise ParseError(f"not a v{ARTIFACT_VERSION} {kind} artifact: {header!r}", 1)
    try:
        return json.loads(body)
    except json.JSONDecodeError as err:
        raise ParseError(f"corrupt {kind} artifact: {err.msg}", err.lineno + 1)

def pipeline_to_text(pipeline):
    """Self-describing text of a fitted pipeline; reloads exactly."""

    columns = list(pipeline.columns)
    state = {"seed": pipeline.seed, "catalog_digest": pipeline.catalog_digest,
        "strength": pipeline.strength,
        "columns_digest": hashlib.sha256(",".join(columns).encode()).hexdigest(),
        "columns": columns,
        "means": pipeline.imputer.means.tolist(),
        "scales": pipeline.imputer.scales.tolist(),
        "selected": list(pipeline.selected)}
    return _header("pipeline") + json.dumps(state, indent=1) + "\n"

def pipeline_from_text(text):
    state = _split(text, "pipeline")
    columns = tuple(state["columns"])
    if hashlib.sha256(",".join(columns).encode()).hexdigest() != state["columns_digest"]:
        raise ParseError("pipeline artifact columns do not match their digest")
    means = np.array(state["means"], dtype=float)
    scales = np.array(state["scales"], dtype=float)
    means.setflags(write=False)
    scales.setflags(write=False)
    return FittedPipeline(ImputeScale(columns, means, scales), tuple(state["selected"]),
        state["seed"], state["catalog_digest"], state["strength"])


def _spec(spec):
    return {"name": spec.name, "params": spec.params, "ovr": spec.ovr}

def _tree(tree):
    return {"feature": tree.feature.tolist(), "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(), "right": tree.right.tolist(),
        "value": tree.value.tolist(), "impurity": tree.impurity.tolist(),
        "n_samples": tree.n_samples.tolist(), "classes": list(tree.classes),
        "params": tree.params, "seed": tree.seed}

def _encode(model):
    if isinstance(model, ConstantScorer):
        return {"type": "constant", "score": model.score}
    if isinstance(model, DecisionTreeModel):
        return {"type": "tree", **_tree(model)}
    if isinstance(model, ForestModel):
        return {"type": "forest", "trees": [_tree(t) for t in model.trees],
            "classes": list(model.classes), "params": model.params, "seed": model.seed,
            "bootstrap": model.bootstrap}
    if isinstance(model, KnnModel):
        return {"type": "knn", "x": model.x.tolist(), "y": model.y.tolist(),
            "classes": list(model.classes), "k": model.k}
    if isinstance(model, LogRegModel):
        return {"type": "logreg", "weights": model.weights.tolist(), "bias": model.bias,
            "params": model.params, "losses": list(model.losses),
            "classes": list(model.classes)}
    if isinstance(model, OvrModel):
        return {"type": "ovr", "spec": _spec(model.spec), "seed": model.seed,
            "scorers": [_encode(s) for s in model.scorers], "classes": list(model.classes),
            "threshold": model.threshold, "warnings": list(model.warnings)}
    if isinstance(model, MulticlassModel):
        return {"type": "multiclass", "spec": _spec(model.spec), "seed": model.seed,
            "model": _encode(model.model)}
    raise TypeError(f"cannot serialize {type(model).__name__}")

def _decode_tree(state):
    return DecisionTreeModel(
        feature=np.array(state["feature"], dtype=int),
        threshold=np.array(state["threshold"], dtype=float),
        left=np.array(state["left"], dtype=int),
        right=np.array(state["right"], dtype=int),
        value=np.array(state["value"], dtype=float).reshape(len(state["feature"]), -1),
        impurity=np.array(state["impurity"], dtype=float),
        n_samples=np.array(state["n_samples"], dtype=int),
        classes=tuple(state["classes"]), params=state["params"], seed=state["seed"])

def _decode(state):
    kind = state["type"]
    if kind == "constant":
        return ConstantScorer(state["score"])
    if kind == "tree":
        return _decode_tree(state)
    if kind == "forest":
        return ForestModel(tuple(_decode_tree(t) for t in state["trees"]),
            tuple(state["classes"]), state["params"], state["seed"], state["bootstrap"])
    if kind == "knn":
        return KnnModel(np.array(state["x"], dtype=float), np.array(state["y"], dtype=int),
            tuple(state["classes"]), state["k"])
    if kind == "logreg":
        return LogRegModel(np.array(state["weights"], dtype=float), state["bias"],
            state["params"], tuple(state["losses"]), tuple(state["classes"]))
    if kind == "ovr":
        return OvrModel(ModelSpec(**state["spec"]), tuple(map(_decode, state["scorers"])),
            state["seed"], tuple(state["classes"]), state["threshold"],
            tuple(state["warnings"]))
    if kind == "multiclass":
        return MulticlassModel(ModelSpec(**state["spec"]), _decode(state["model"]),
            state["seed"])
    raise ParseError(f"unknown model type {kind!r}")

def model_to_text(model):
    """Self-describing text of a fitted model; reloaded models predict identically."""

    return _header("model") + json.dumps(_encode(model)) + "\n"

def model_from_text(text):
    state = _split(text, "model")
    try:
        return _decode(state)
    except (KeyError, TypeError) as err:
        raise ParseError(f"incomplete model artifact ({err})")
