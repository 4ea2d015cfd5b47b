"""Shared high-precision decimal context."""

from __future__ import annotations

from decimal import Context, Decimal, ROUND_HALF_EVEN

PRECISION = 80

CONTEXT = Context(prec=PRECISION, rounding=ROUND_HALF_EVEN, Emax=999_999, Emin=-999_999)

_DISPLAY = Context(prec=30, rounding=ROUND_HALF_EVEN)


def to_decimal(value) -> Decimal:
    """Exact conversion; floats go through ``repr`` so 0.1 stays 0.1."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(repr(value))
    return Decimal(value)


def fmt(value: Decimal) -> str:
    """Render a decimal at 30 significant digits for reports."""
    if not value.is_finite():
        return "inf" if value > 0 else ("-inf" if value.is_infinite() else "nan")
    return str(_DISPLAY.plus(value))
