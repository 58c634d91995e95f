"""JSON model files.

Floats are written with ``repr`` (shortest round-trip form) and the layout is
canonical, so save -> load -> save reproduces the file byte for byte
and every matrix entry comes back bit-identical.
"""
import json
from dataclasses import asdict

import numpy as np

from .classify import TrainedModel
from .data import LabeledDataset, Standardizer
from .errors import ParseError
from .fusion import ComponentTransform, FusionAtlas
from .lmnn import LmnnConfig

SCHEMA_VERSION = 1

__all__ = ["SCHEMA_VERSION", "model_to_dict", "model_from_dict",
           "dumps_model", "save_model", "load_model"]


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def model_to_dict(model, standardizer, config=None):
    d = model.train.dim
    comps = []
    if model.atlas is not None:
        for c in model.atlas.components:
            comps.append({"matrix": _floats(c.linear),
                          "center": _floats(c.center),
                          "sigma": float(c.sigma)})
    return {
        "schema_version": SCHEMA_VERSION,
        "dimension": d,
        "fusion": model.kind,
        "k": int(model.k),
        "steps": int(model.atlas.steps) if model.atlas is not None else None,
        "components": comps,
        "assignments": ([int(v) for v in model.assignments]
                        if model.assignments is not None else None),
        "standardization": {"mean": _floats(standardizer.mean),
                            "scale": _floats(standardizer.scale)},
        "training": {"points": _floats(model.train.points),
                     "labels": [int(v) for v in model.train.labels]},
        "config": asdict(config) if config is not None else None,
    }


def model_from_dict(doc):
    """Rebuild ``(model, standardizer, config)`` from a parsed model file."""
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r}")
    try:
        d = int(doc["dimension"])
        train = LabeledDataset(
            np.array(doc["training"]["points"], dtype=float).reshape(-1, d),
            np.array(doc["training"]["labels"], dtype=np.int64))
        scaler = Standardizer(np.array(doc["standardization"]["mean"]),
                              np.array(doc["standardization"]["scale"]))
        atlas = matrices = assignments = None
        if doc["components"]:
            comps = tuple(
                ComponentTransform(
                    np.array(c["matrix"], dtype=float).reshape(d + 1, d + 1),
                    np.array(c["center"], dtype=float), c["sigma"])
                for c in doc["components"])
            atlas = FusionAtlas(comps, doc["steps"])
            matrices = np.array([c.linear[:d, :d] for c in comps])
        if doc.get("assignments") is not None:
            assignments = np.array(doc["assignments"], dtype=np.int64)
        model = TrainedModel(doc["fusion"], train, int(doc["k"]), atlas,
                             matrices, assignments)
        config = LmnnConfig(**doc["config"]) if doc.get("config") else None
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed model file: {exc}") from None
    return model, scaler, config


def _compact(value):
    return json.dumps(value, sort_keys=True, separators=(", ", ": "))


def dumps_model(model, standardizer, config=None):
    """Canonical text: one top-level key per line, one component per line."""
    doc = model_to_dict(model, standardizer, config)
    items = []
    for key in sorted(doc):
        value = doc[key]
        if key == "components" and value:
            inner = ",\n".join("  " + _compact(c) for c in value)
            text = "[\n" + inner + "\n ]"
        else:
            text = _compact(value)
        items.append(f" {json.dumps(key)}: {text}")
    return "{\n" + ",\n".join(items) + "\n}\n"


def save_model(path, model, standardizer, config=None):
    with open(path, "w") as fh:
        fh.write(dumps_model(model, standardizer, config))


def load_model(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc), exc.lineno) from None
    return model_from_dict(doc)
