"""Canonical JSON serialization and state digests.

Every hash in the system (snapshot digests, convergence reports) is SHA-256
over this canonical form, so the rules are pinned tightly:

  * object keys sorted by code point, no insignificant whitespace
  * strings escaped minimally (only ``"``, ``\\`` and U+0000..U+001F)
  * numbers printed as the shortest round-trip decimal using ECMAScript
    ``Number::toString`` conventions (integral floats drop the ".0",
    exponent form only outside 1e-6..1e21, "e+"/"e-" without zero padding)

The ECMAScript number style makes the digest reproducible from JavaScript
clients with plain ``JSON.stringify`` semantics, not just from Python.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any


def format_number(x: float) -> str:
    """Shortest round-trip decimal for a finite double, ECMAScript style."""
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite float has no canonical form")
    if x == 0.0:
        return "0"  # JSON.stringify(-0) is "0"
    sign = "-" if x < 0 else ""
    r = repr(abs(x))  # CPython repr is already the shortest round-trip form
    if "e" in r:
        mant, _, estr = r.partition("e")
        e10 = int(estr)
    else:
        mant, e10 = r, 0
    ipart, _, fpart = mant.partition(".")
    digits = ipart + fpart
    n = len(ipart) + e10  # decimal point position: x = 0.<digits> * 10**n
    while digits.startswith("0"):
        digits = digits[1:]
        n -= 1
    digits = digits.rstrip("0")
    k = len(digits)
    if k <= n <= 21:
        out = digits + "0" * (n - k)
    elif 0 < n <= 21:
        out = digits[:n] + "." + digits[n:]
    elif -6 < n <= 0:
        out = "0." + "0" * (-n) + digits
    else:
        sig = digits if k == 1 else digits[0] + "." + digits[1:]
        exp = n - 1
        out = f"{sig}e{'+' if exp >= 0 else '-'}{abs(exp)}"
    return sign + out


def _encode(value: Any, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(format_number(value))
    elif isinstance(value, str):
        # json.dumps with ensure_ascii=False escapes exactly the minimal set
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    elif isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if not isinstance(key, str):
                raise TypeError(f"canonical object keys must be str, got {key!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _encode(value[key], out)
        out.append("}")
    else:
        raise TypeError(f"{type(value).__name__} is not canonically serializable")


def canonical_json(value: Any) -> str:
    out: list[str] = []
    _encode(value, out)
    return "".join(out)


def digest(value: Any) -> str:
    """Hex SHA-256 of the canonical serialization."""
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()
