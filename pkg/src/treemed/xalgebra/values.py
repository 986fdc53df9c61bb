"""Leaf value handling: decimal parsing, the comparison rule and sort keys.

Values are untyped text. Two values compare numerically when both parse as
plain decimals (no exponent, no NaN/Infinity), otherwise as UTF-8 byte
strings. Numeric values sort before text values.
"""

from __future__ import annotations

import re
from decimal import Context, Decimal, ROUND_HALF_EVEN

DECIMAL_RE = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$")

# Wide enough that sums of inputs with <= 15 significant digits stay exact.
DECIMAL_CONTEXT = Context(prec=60, rounding=ROUND_HALF_EVEN)
# Division (AVG) may not terminate; results are rounded to this many digits.
AVG_CONTEXT = Context(prec=28, rounding=ROUND_HALF_EVEN)


def parse_decimal(text):
    """Return a Decimal for plain decimal text, else None."""
    if text is None:
        return None
    text = text.strip()
    if not DECIMAL_RE.match(text):
        return None
    return Decimal(text)


def format_decimal(value: Decimal) -> str:
    """Canonical text of a decimal: no exponent, no trailing zeros, no '-0'."""
    if value.is_zero():
        return "0"
    text = format(value.normalize(DECIMAL_CONTEXT), "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


def is_canonical_decimal(text) -> bool:
    value = parse_decimal(text)
    return value is not None and format_decimal(value) == text


def _bytes(text):
    return text.encode("utf-8")


def compare_values(a: str, b: str) -> int:
    """Three-way comparison of two leaf texts under the decided rule."""
    da, db = parse_decimal(a), parse_decimal(b)
    if da is not None and db is not None:
        return (da > db) - (da < db)
    if da is not None:
        return -1
    if db is not None:
        return 1
    ba, bb = _bytes(a), _bytes(b)
    return (ba > bb) - (ba < bb)


def sort_key(text):
    """Total-order key consistent with compare_values; None (absent) sorts first."""
    if text is None:
        return (0,)
    d = parse_decimal(text)
    if d is not None:
        return (1, 0, d)
    return (1, 1, _bytes(text))


def apply_op(cmp: int, op: str) -> bool:
    if op == "=":
        return cmp == 0
    if op == "!=":
        return cmp != 0
    if op == "<":
        return cmp < 0
    if op == "<=":
        return cmp <= 0
    if op == ">":
        return cmp > 0
    if op == ">=":
        return cmp >= 0
    raise ValueError(f"unknown comparison operator {op!r}")
