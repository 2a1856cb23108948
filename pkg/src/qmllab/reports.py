"""Report containers, canonical JSON/CSV emission and schema validation."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import jsonschema

SCHEMA_VERSION = "1.0"


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    parameters: dict
    trials: list
    aggregate: dict
    schema_version: str = SCHEMA_VERSION
    game: str | None = None

    def to_dict(self) -> dict:
        d = {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "config": self.config,
            "parameters": self.parameters,
            "trials": self.trials,
            "aggregate": self.aggregate,
        }
        if self.game is not None:
            d["game"] = self.game
        return d

    def to_json(self) -> str:
        return dumps(self.to_dict())


def sanitize(obj):
    """Make ``obj`` strict-JSON safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def dumps(obj) -> str:
    """Canonical serialization: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(sanitize(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: sanitize(row.get(c)) for c in columns})
    return buf.getvalue()


_number = {"type": "number"}
_ci = {
    "type": "object",
    "required": ["ci_low", "ci_high"],
    "properties": {"ci_low": _number, "ci_high": _number},
}

_BASE = {
    "type": "object",
    "required": ["schema_version", "kind", "config", "parameters", "trials", "aggregate"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"enum": ["calibrate", "learn", "qmlh", "owsg"]},
        "config": {"type": "object"},
        "parameters": {"type": "object"},
        "trials": {"type": "array", "items": {"type": "object"}},
        "aggregate": {"type": "object"},
        "game": {"type": "string"},
    },
}

_KIND_SCHEMAS = {
    "calibrate": {
        "properties": {
            "aggregate": {"required": ["B_hat", "worst_ratio", "pairs"],
                          "properties": {"B_hat": {"type": "number", "exclusiveMinimum": 0}}},
            "trials": {"items": {"required": ["pair_index", "ratio"]}},
        }
    },
    "learn": {
        "properties": {
            "parameters": {"required": ["T", "B_hat", "epsilon_star", "outcome_bits"]},
            "aggregate": {**_ci, "required": ["trials", "successes", "ci_low", "ci_high",
                                              "per_key"]},
            "trials": {"items": {"required": ["trial_index", "key", "hypothesis",
                                              "trace_distance", "success", "diagnostics"]}},
        }
    },
    "qmlh": {
        "properties": {
            "aggregate": {"required": ["rows"]},
            "trials": {"items": {"required": ["T", "bad_rate", "bound", "trials"]}},
        }
    },
    "owsg": {
        "required": ["game"],
        "properties": {
            "game": {"const": "owsg"},
            "aggregate": {"required": ["runs"]},
        }
    },
}


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``report`` breaks its kind's schema."""
    jsonschema.validate(report, _BASE)
    jsonschema.validate(report, _KIND_SCHEMAS[report["kind"]])
