"""Exact rational money and ratio arithmetic.

All budget, cost, and index math runs on ``fractions.Fraction`` so rollups
are order-independent and comparable to an oracle bit-for-bit. Values are
serialized as ``"numerator/denominator"`` strings (plain integer string when
the denominator is 1) and only rounded at the display/CSV boundary.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ValidationError

ZERO = Fraction(0)


def parse_ratio(text: str | int | float | Fraction) -> Fraction:
    """Parse a ratio from a decimal string ("0.25"), a fraction string
    ("1/4"), or a number. Raises ValidationError on malformed input."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        return Fraction(str(text))
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"malformed number {text!r}: {exc}") from exc


def parse_money(text: str | int | float | Fraction) -> Fraction:
    value = parse_ratio(text)
    return value


def parse_nonnegative_money(text: str | int | float | Fraction) -> Fraction:
    value = parse_money(text)
    if value < 0:
        raise ValidationError(f"amount must be >= 0, got {frac_str(value)}")
    return value


def frac_str(value: Fraction) -> str:
    """Canonical serialization: "n" or "n/d"."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _round_half_even_scaled(value: Fraction, digits: int) -> int:
    """Exact round-half-to-even of value*10^digits to an integer."""
    scale = 10**digits
    n = value.numerator * scale
    d = value.denominator
    sign = -1 if n < 0 else 1
    n = abs(n)
    q, r = divmod(n, d)
    twice = 2 * r
    if twice > d or (twice == d and q % 2 == 1):
        q += 1
    return sign * q


def format_fixed(value: Fraction, digits: int) -> str:
    """Fixed-point decimal string with exactly `digits` fraction digits."""
    scaled = _round_half_even_scaled(value, digits)
    scale = 10**digits
    sign = "-" if scaled < 0 else ""
    scaled = abs(scaled)
    if digits == 0:
        return f"{sign}{scaled}"
    return f"{sign}{scaled // scale}.{scaled % scale:0{digits}d}"


def format_money(value: Fraction) -> str:
    return format_fixed(value, 2)


def format_index(value: Fraction | None) -> str:
    """CPI/SPI display form; absent indices render as the empty string."""
    if value is None:
        return ""
    return format_fixed(value, 4)
