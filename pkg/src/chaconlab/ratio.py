"""Canonical string form for exact rationals used in JSON payloads.

The wire format is "p/q" in lowest terms with q > 0, "p" alone when q == 1.
`fractions.Fraction` already guarantees lowest terms and positive
denominator, so these are thin converters.
"""

from __future__ import annotations

from fractions import Fraction


def format_ratio(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_ratio(s: str) -> Fraction:
    if not isinstance(s, str):
        raise ValueError(f"expected 'p/q' string, got {type(s).__name__}")
    return Fraction(s)
