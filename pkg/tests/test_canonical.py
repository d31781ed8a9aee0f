"""Canonical serialization: pinned against ECMAScript formatting.

The frozen number strings below were produced by JSON.stringify under
node 20; the canonical encoder must reproduce them exactly or JavaScript
mirrors could never agree with the server on a state digest.
"""

import math

import pytest

from docubits.canonical import canonical_json, digest, format_number

JS_NUMBERS = [
    (0.0, "0"),
    (-0.0, "0"),
    (1.0, "1"),
    (-1.0, "-1"),
    (0.5, "0.5"),
    (-0.5, "-0.5"),
    (1.5, "1.5"),
    (100.0, "100"),
    (1e5, "100000"),
    (123456789.123, "123456789.123"),
    (0.1, "0.1"),
    (1 / 3, "0.3333333333333333"),
    (2 / 3, "0.6666666666666666"),
    (1e15, "1000000000000000"),
    (1e16, "10000000000000000"),
    (123e18, "123000000000000000000"),
    (1e21, "1e+21"),
    (1.5e21, "1.5e+21"),
    (-2.5e22, "-2.5e+22"),
    (1e-6, "0.000001"),
    (1e-7, "1e-7"),
    (3.14e-8, "3.14e-8"),
    (5e-324, "5e-324"),
    (1.7976931348623157e308, "1.7976931348623157e+308"),
    (0.30000000000000004, "0.30000000000000004"),
    (1.2, "1.2"),
    (0.8414709848078965, "0.8414709848078965"),
    (-0.0001, "-0.0001"),
    (0.000001234, "0.000001234"),
    (6.02e23, "6.02e+23"),
    (1.6, "1.6"),
    (2e-16, "2e-16"),
]


def test_numbers_match_js_stringify():
    for value, expected in JS_NUMBERS:
        assert format_number(value) == expected, value


def test_non_finite_rejected():
    for bad in (math.nan, math.inf, -math.inf):
        with pytest.raises(ValueError):
            format_number(bad)


def test_object_keys_sorted_and_compact():
    s = canonical_json({"b": 1, "a": [1.0, None, True], "c": "x"})
    assert s == '{"a":[1,null,true],"b":1,"c":"x"}'


def test_string_escaping_minimal():
    # DEL stays raw, control chars escape, non-ASCII stays raw
    assert canonical_json("\x7f\x1f\"x\\ü") == '"\x7f\\u001f\\"x\\\\ü"'
    assert canonical_json("line\nbreak") == '"line\\nbreak"'


def test_digest_stable_and_sensitive():
    a = {"x": 1.0, "y": "hello"}
    b = {"y": "hello", "x": 1}
    assert digest(a) == digest(b)  # 1.0 and 1 canonicalize identically
    assert digest(a) != digest({"x": 2, "y": "hello"})


def test_round_trip_through_parse():
    import json

    doc = {"pos": [1.0, -0.0, 0.30000000000000004], "n": 17, "s": "ü\n"}
    once = canonical_json(doc)
    again = canonical_json(json.loads(once))
    assert once == again
