"""Deterministic CSV/JSON writers, value formatting, and config parsing."""

import json
import math
import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratetip.errors import UsageError
from ratetip.reporting import format_value, read_config, write_csv, write_json
from ratetip.tipping import Classification


# --- value formatting --------------------------------------------------------

def test_format_value_floats():
    assert format_value(0.1) == "0.1"
    assert format_value(1 / 3) == "0.333333333333"
    assert format_value(math.inf) == "inf"
    assert format_value(-math.inf) == "-inf"
    assert format_value(math.nan) == "nan"
    assert format_value("label") == "label"
    assert format_value(7) == "7"


@given(st.floats(allow_nan=False, allow_infinity=False,
                 min_value=-1e12, max_value=1e12))
@settings(max_examples=100)
def test_format_value_roundtrip(x):
    back = float(format_value(x))
    assert back == pytest.approx(x, rel=1e-11, abs=1e-300)


# --- CSV ---------------------------------------------------------------------

def test_write_csv_layout(tmp_path):
    path = tmp_path / "out.csv"
    write_csv(path, [("a", [1.0, 2.0]), ("b", [0.5, math.inf])],
              metadata={"model": "quad_arctan", "r": 0.25})
    lines = path.read_text().splitlines()
    assert lines[0] == "# model = quad_arctan"
    assert lines[1] == "# r = 0.25"
    assert lines[2] == "a,b"
    assert lines[3] == "1,0.5"
    assert lines[4] == "2,inf"


def test_write_csv_rejects_ragged_columns(tmp_path):
    path = tmp_path / "bad.csv"
    with pytest.raises(UsageError, match="length"):
        write_csv(path, [("a", [1.0]), ("b", [1.0, 2.0])])
    assert not path.exists()
    # failed writes must not leave temp files behind
    assert [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")] == []


def test_write_csv_deterministic(tmp_path):
    cols = [("x", [0.1, 0.2, 0.3]), ("y", [1 / 3, 2 / 3, 1.0])]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(a, cols)
    write_csv(b, cols)
    assert a.read_bytes() == b.read_bytes()


# --- JSON --------------------------------------------------------------------

def test_write_json_sorted_and_strict(tmp_path):
    path = tmp_path / "out.json"
    write_json(path, {"b": 1, "a": {"nested": math.inf},
                      "c": [math.nan, -math.inf, 2.0]})
    text = path.read_text()
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    payload = json.loads(text)  # strict JSON: non-finite became strings
    assert payload["a"]["nested"] == "inf"
    assert payload["c"] == ["nan", "-inf", 2.0]


def test_write_json_unwraps_enums(tmp_path):
    path = tmp_path / "enum.json"
    write_json(path, {"classification": Classification.VISIBLE_TIPPING})
    assert json.loads(path.read_text())["classification"] == "visible_tipping"


def test_write_json_deterministic(tmp_path):
    payload = {"z": [1, 2, 3], "a": 0.1}
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    write_json(a, payload)
    write_json(b, payload)
    assert a.read_bytes() == b.read_bytes()


# --- config files ------------------------------------------------------------

def test_read_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("""
# probe settings
epsilon = 0.25
tau = 10   # horizon
model = quad_tanh
""")
    cfg = read_config(path)
    assert cfg == {"epsilon": "0.25", "tau": "10", "model": "quad_tanh"}


def test_read_config_rejects_malformed_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("epsilon 0.25\n")
    with pytest.raises(UsageError, match="bad.cfg:1"):
        read_config(path)
