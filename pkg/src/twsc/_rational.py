"""Small helpers for moving exact rationals in and out of text."""
from fractions import Fraction
from numbers import Rational

FLOAT_TOL = 1e-9


def as_fraction(value):
    """Parse an int, Fraction, or ``"p/q"`` string into a Fraction.

    Floats are rejected: instance data is exact by contract.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"expected int, Fraction or 'p/q' string, got {value!r}")


def fmt(value):
    """Render a number for JSON output: Fractions as 'p/q', floats as repr."""
    if isinstance(value, float):
        return repr(value)
    return str(Fraction(value))


def parse_number(text, mode="rational"):
    if mode == "float":
        if isinstance(text, str) and "/" in text:
            return float(Fraction(text))
        return float(text)
    return as_fraction(text)


def is_zero(x, mode):
    return x == 0 if mode == "rational" else abs(x) <= FLOAT_TOL


def mode_of(value):
    return "float" if isinstance(value, float) else "rational"
