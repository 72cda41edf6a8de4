import json

import numpy as np

from saaconic.report import format_float, write_json


def test_seventeen_digit_roundtrip():
    rng = np.random.default_rng(0)
    values = np.concatenate([
        rng.standard_normal(500),
        10.0 ** rng.uniform(-300, 300, size=500) * rng.choice([-1, 1], size=500),
        [0.0, -0.0, 1e-308, np.pi],
    ])
    for x in values:
        assert float(format_float(x)) == float(x)


def test_nan_inf_tokens():
    assert format_float(float("nan")) == "nan"
    assert format_float(float("inf")) == "inf"
    assert format_float(float("-inf")) == "-inf"


def test_json_deterministic_and_tagged(tmp_path):
    payload = {"b": [1.5, float("nan")], "a": {"z": 2, "y": np.float64(0.1)}}
    p1 = write_json(payload, tmp_path / "x.json")
    p2 = write_json(payload, tmp_path / "y.json")
    assert p1.read_text() == p2.read_text()
    loaded = json.loads(p1.read_text())
    assert loaded["schema"] == "saaconic.v1"
    assert loaded["b"][1] == "nan"
