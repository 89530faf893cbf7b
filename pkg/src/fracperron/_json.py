"""Helpers for the JSON encoding of complex numbers and arrays.

Complex numbers travel as ``[re, im]`` pairs; plain JSON numbers are accepted
on input as real values.
"""

from __future__ import annotations

import json
import math
from numbers import Real

import numpy as np

from .errors import ParseError


def encode_complex(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def decode_complex(obj, field: str = "") -> complex:
    if isinstance(obj, bool):
        raise ParseError("expected a number or [re, im] pair, got a boolean", field)
    if isinstance(obj, Real):
        return complex(float(obj), 0.0)
    if isinstance(obj, (list, tuple)) and len(obj) == 2 and all(
        isinstance(v, Real) and not isinstance(v, bool) for v in obj
    ):
        return complex(float(obj[0]), float(obj[1]))
    raise ParseError(f"expected a number or [re, im] pair, got {obj!r}", field)


def encode_vector(v) -> list[list[float]]:
    return [encode_complex(x) for x in np.asarray(v).ravel()]


def decode_vector(obj, field: str = "") -> np.ndarray:
    if not isinstance(obj, (list, tuple)):
        raise ParseError("expected a list", field)
    return np.array([decode_complex(x, f"{field}[{i}]") for i, x in enumerate(obj)], dtype=complex)


def encode_matrix(M) -> list[list[list[float]]]:
    return [encode_vector(row) for row in np.asarray(M)]


def decode_matrix(obj, field: str = "") -> np.ndarray:
    if not isinstance(obj, (list, tuple)) or not obj:
        raise ParseError("expected a non-empty list of rows", field)
    rows = [decode_vector(row, f"{field}[{i}]") for i, row in enumerate(obj)]
    n = len(rows[0])
    if any(len(r) != n for r in rows):
        raise ParseError("rows have different lengths", field)
    return np.array(rows, dtype=complex)


def finite_or_none(x):
    """JSON has no inf/nan; encode them as strings so the output stays valid."""
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def decode_float(x) -> float:
    if isinstance(x, str):
        return float(x)
    return float(x)


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed separators, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
