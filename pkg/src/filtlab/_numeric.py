"""Dual-mode numbers: exact ``Fraction`` or ``float``.

Matrices are numpy arrays of dtype ``object`` holding Fractions in exact
mode and ``float64`` arrays otherwise.
"""
from __future__ import annotations

from fractions import Fraction
from math import lcm

import numpy as np

FLOAT_TOL = 1e-9
EXACT_MAX_STATES = 64
EXACT_MAX_HORIZON = 32


def parse_number(x, exact: bool):
    """Parse an int, float, Fraction or ``"a/b"`` string."""
    if isinstance(x, bool):
        raise TypeError(f"not a number: {x!r}")
    if exact:
        if isinstance(x, float):
            return Fraction(repr(x))
        if isinstance(x, (int, Fraction, str)):
            return Fraction(x)
        if isinstance(x, np.integer):
            return Fraction(int(x))
        if isinstance(x, np.floating):
            return Fraction(repr(float(x)))
        raise TypeError(f"not a number: {x!r}")
    if isinstance(x, str):
        return float(Fraction(x))
    return float(x)


def as_vector(values, exact: bool) -> np.ndarray:
    if exact:
        return np.array([parse_number(v, True) for v in values], dtype=object)
    return np.array([parse_number(v, False) for v in values], dtype=float)


def as_matrix(rows, exact: bool) -> np.ndarray:
    rows = [list(r) for r in rows]
    if not rows:
        return np.zeros((0, 0), dtype=object if exact else float)
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        from .errors import ShapeMismatch
        raise ShapeMismatch("matrix rows have unequal lengths")
    out = np.empty((len(rows), width), dtype=object if exact else float)
    for i, r in enumerate(rows):
        for j, v in enumerate(r):
            out[i, j] = parse_number(v, exact)
    return out


def convert(arr: np.ndarray, exact: bool) -> np.ndarray:
    """Convert an array into the given mode."""
    if exact:
        if arr.dtype == object:
            return arr
        out = np.empty(arr.shape, dtype=object)
        for idx, v in np.ndenumerate(arr):
            out[idx] = parse_number(float(v), True)
        return out
    return np.asarray(arr, dtype=float) if arr.dtype != object else arr.astype(float)


def is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def zero(exact: bool):
    return Fraction(0) if exact else 0.0


def one(exact: bool):
    return Fraction(1) if exact else 1.0


def close(a, b, exact: bool, tol: float = FLOAT_TOL) -> bool:
    if exact:
        return a == b
    return abs(a - b) <= tol


def to_json(x):
    """JSON-friendly scalar: exact values become ``"a/b"`` strings."""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def fmt(x) -> str:
    """Stable text rendering for reports and CSV files."""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def common_denominator(values) -> int:
    d = 1
    for v in values:
        d = lcm(d, v.denominator)
    return d
