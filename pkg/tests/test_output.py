import math
import os

import pytest
from hypothesis import given, settings, strategies as st

from finslab.output import atomic_write_text, csv_text, fmt, read_csv, write_csv


def test_atomic_write_leaves_no_temp_files(tmp_path):
    path = atomic_write_text(tmp_path / "sub" / "a.txt", "hello\n")
    assert path.read_text() == "hello\n"
    atomic_write_text(path, "again\n")
    assert os.listdir(path.parent) == ["a.txt"]


def test_failed_write_keeps_old_file(tmp_path):
    path = atomic_write_text(tmp_path / "a.txt", "old\n")
    with pytest.raises(TypeError):
        atomic_write_text(path, 42)
    assert path.read_text() == "old\n" and os.listdir(tmp_path) == ["a.txt"]


def test_fmt():
    assert fmt(3) == "3" and fmt(0.1) == "0.1" and fmt("x") == "x"
    assert fmt(1 / 3) == repr(1 / 3)


@settings(max_examples=50, deadline=None)
@given(rows=st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False),
                               st.floats(allow_nan=False, allow_infinity=False)), max_size=8))
def test_csv_round_trip_full_precision(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    write_csv(path, ("a", "b"), rows)
    header, back = read_csv(path)
    assert header == ["a", "b"]
    assert [tuple(r) for r in back] == [tuple(map(float, r)) for r in rows]


def test_csv_text_is_plain():
    assert csv_text(("ell", "err"), [(4.0, math.exp(-3))]) == f"ell,err\n4.0,{math.exp(-3)!r}\n"
