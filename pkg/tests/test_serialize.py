import json
import math

from hypothesis import given, strategies as st

from microgrid_auction.serialize import csv_cell, dumps, format_float, to_csv


def test_floats_print_17_significant_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1.0) == "1.0"
    assert format_float(-2.5) == "-2.5"


def test_dumps_known_document():
    doc = {"p": 0.25, "items": [1, 2.5, None, True, "a,b"], "empty": {}}
    text = dumps(doc)
    assert json.loads(text) == doc


@given(
    st.floats(allow_nan=False, allow_infinity=False),
)
def test_float_roundtrip_exact(value):
    assert float(format_float(value)) == value


@given(
    st.recursive(
        st.one_of(
            st.none(),
            st.booleans(),
            st.integers(min_value=-(2**53), max_value=2**53),
            st.floats(allow_nan=False, allow_infinity=False),
            st.text(max_size=20),
        ),
        lambda children: st.one_of(
            st.lists(children, max_size=4),
            st.dictionaries(st.text(max_size=8), children, max_size=4),
        ),
        max_leaves=20,
    )
)
def test_dumps_parses_back(doc):
    parsed = json.loads(dumps(doc))

    def eq(a, b):
        if isinstance(a, float) or isinstance(b, float):
            return float(a) == float(b) or (math.isnan(a) and math.isnan(b))
        if isinstance(a, list):
            return len(a) == len(b) and all(eq(x, y) for x, y in zip(a, b))
        if isinstance(a, dict):
            return a.keys() == b.keys() and all(eq(a[k], b[k]) for k in a)
        return a == b

    assert eq(doc, parsed)


def test_csv_cells():
    assert csv_cell(None) == ""
    assert csv_cell(True) == "true"
    assert csv_cell(3) == "3"
    assert csv_cell("with,comma") == '"with,comma"'
    assert csv_cell('say "hi"') == '"say ""hi"""'


def test_to_csv_dict_and_sequence_rows():
    header = ("a", "b")
    text = to_csv(header, [{"a": 1, "b": None}, [2.5, "x"]])
    assert text == "a,b\n1,\n2.5,x\n"
