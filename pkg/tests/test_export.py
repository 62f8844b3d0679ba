import json

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from adiabatic_cz.export import csv_text, fmt, json_text, metadata, read_csv, write_csv


def test_fmt_rules():
    assert fmt(True) == "1"
    assert fmt(np.int64(7)) == "7"
    assert fmt(-0.0) == "0"
    assert fmt(float("nan")) == "nan"
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt("x") == "x"


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_keeps_twelve_digits(x):
    y = float(fmt(x))
    assert y == x or abs(y - x) <= 1e-11 * abs(x)


def test_csv_round_trip(tmp_path):
    meta = {"seed": 4, "note": "a b"}
    path = write_csv(tmp_path / "sub" / "t.csv", ["a", "b"], [[1, 0.5], [2, np.float64(1e-20)]], meta)
    got_meta, header, rows = read_csv(path)
    assert got_meta == {"seed": "4", "note": "a b"}
    assert header == ["a", "b"] and rows == [["1", "0.5"], ["2", "1e-20"]]
    assert path.read_bytes().count(b"\r") == 0
    assert read_csv(csv_text(["a"], [[1]]), text=True)[1:] == (["a"], [["1"]])


def test_json_is_canonical():
    text = json_text({"b": np.array([1.0, np.nan]), "a": np.int32(2), "c": 1 + 2j})
    assert json.loads(text) == {"a": 2, "b": [1.0, None], "c": [1.0, 2.0]}
    assert text.index('"a"') < text.index('"b"')


def test_metadata_fields(measured):
    meta = metadata(measured, 3, study="x")
    assert meta["seed"] == 3 and len(meta["preset_hash"]) == 16
    assert metadata()["preset_hash"] == "none"
    assert metadata(measured)["preset_hash"] == meta["preset_hash"]
