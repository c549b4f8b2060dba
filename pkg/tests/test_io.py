import math

import pytest

from dirac_asym.io import SchemaError, dumps_table, read_table


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_round_trip_exact(fmt):
    rows = [(0.1, 1 / 3, "bounded", True, math.inf), (-2.5e-300, 7.0, "growing", False, 1e308)]
    text = dumps_table(["a", "b", "c", "d", "e"], rows, fmt, {"t0": 20.0})
    assert text.startswith("# schema=1\n")
    cols, back, meta = read_table(text)
    assert cols == ["a", "b", "c", "d", "e"]
    assert back == rows
    assert meta["t0"] == "20.0"


def test_missing_header():
    with pytest.raises(SchemaError):
        read_table("a,b\n1,2\n")


def test_ragged_rows():
    with pytest.raises(SchemaError):
        read_table("# schema=1\na,b\n1\n")
