import json
import math

import jsonschema
import numpy as np
import pytest

from qmllab.reports import ExperimentReport, dumps, sanitize, to_csv, validate_report


def test_sanitize_handles_numpy_and_non_finite():
    obj = {"a": np.float64(0.5), "b": np.int64(3), "c": [math.inf, -math.inf, math.nan], 1: True}
    assert sanitize(obj) == {"a": 0.5, "b": 3, "c": ["inf", "-inf", "nan"], "1": True}


def test_dumps_is_canonical():
    text = dumps({"b": 1, "a": {"d": 2, "c": 3}})
    assert text == json.dumps({"a": {"c": 3, "d": 2}, "b": 1}, indent=2) + "\n"
    assert dumps({"x": math.inf}) == '{\n  "x": "inf"\n}\n'


def test_to_csv():
    text = to_csv([{"a": 1, "b": math.inf, "extra": 0}, {"a": 2}], ["a", "b"])
    assert text == "a,b\n1,inf\n2,\n"


def _report(**over):
    base = dict(kind="calibrate", config={}, parameters={},
                trials=[{"pair_index": 0, "ratio": 0.7}],
                aggregate={"B_hat": 0.63, "worst_ratio": 0.7, "pairs": 1})
    base.update(over)
    return ExperimentReport(**base).to_dict()


def test_valid_report_passes():
    validate_report(_report())


@pytest.mark.parametrize("over", [
    {"aggregate": {"B_hat": 0, "worst_ratio": 0, "pairs": 1}},
    {"trials": [{"ratio": 1}]},
    {"kind": "owsg", "aggregate": {"runs": {}}},
    {"schema_version": "0.9"},
])
def test_invalid_reports_fail(over):
    with pytest.raises(jsonschema.ValidationError):
        validate_report(_report(**over))


def test_owsg_tag():
    validate_report(_report(kind="owsg", game="owsg", aggregate={"runs": {}}, trials=[]))
