"""The JSON system description consumed by the command-line front end.

A minimal document::

    {
      "alpha": 0.5,
      "matrix": [[-1, 0], [0, 1]],
      "forcing": [{"family": "Constant", "params": {"value": 1}},
                  {"family": "ExpDecay", "params": {"amplitude": 1, "rate": 1}}],
      "initial": [0, [1, 0]],
      "grid": {"t_end": 10, "n_steps": 200},
      "tolerances": {"tol": 1e-8}
    }

Matrix and vector entries are real numbers or ``[re, im]`` pairs. ``grid``
may also be an explicit list of increasing times starting at 0. Optional
sections: ``jordan_blocks`` (list of ``[eigenvalue, size]``), ``verify``,
``witness`` and ``bounded`` (parameters for the matching subcommands).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _json
from .errors import ParseError
from .forcing import ForcingFunction, forcing_from_dict

TOLERANCE_KEYS = ("tol", "tail_tol", "ang_tol", "mag_tol", "cond_max")
SECTIONS = ("verify", "witness", "bounded")
KNOWN_KEYS = {"alpha", "matrix", "forcing", "initial", "grid", "tolerances", "jordan_blocks", "name", "description", *SECTIONS}


@dataclass(eq=False)
class SystemSpec:
    alpha: float
    matrix: np.ndarray
    forcing: list[ForcingFunction]
    initial: np.ndarray | None = None
    grid: dict | list | None = None
    tolerances: dict = field(default_factory=dict)
    jordan_blocks: list | None = None
    sections: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def times(self, default_t_end: float | None = None) -> np.ndarray | None:
        """The time grid, or ``None`` when neither the spec file nor the caller fixes one."""
        from .solver import check_grid, make_grid

        g = self.grid
        if isinstance(g, list):
            return check_grid(g)
        g = g or {}
        t_end = g.get("t_end") if default_t_end is None else default_t_end
        n = g.get("n_steps")
        if t_end is None:
            return None
        return make_grid(float(t_end), n, self.alpha, bool(g.get("refine", False)))

    def tol(self, key: str, default):
        return self.tolerances.get(key, default)

    def to_dict(self) -> dict:
        d = {
            "alpha": self.alpha,
            "matrix": _json.encode_matrix(self.matrix),
            "forcing": [f.to_dict() for f in self.forcing],
            "tolerances": dict(self.tolerances),
        }
        if self.initial is not None:
            d["initial"] = _json.encode_vector(self.initial)
        if self.grid is not None:
            d["grid"] = self.grid
        if self.jordan_blocks is not None:
            d["jordan_blocks"] = [[_json.encode_complex(l), s] for l, s in self.jordan_blocks]
        d.update(self.sections)
        return d

    def __eq__(self, other):
        if not isinstance(other, SystemSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _positive_float(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) or x <= 0:
        raise ParseError(f"expected a positive number, got {x!r}", where)
    return float(x)


def _parse_grid(g):
    if g is None:
        return None
    if isinstance(g, list):
        if len(g) < 2 or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in g):
            raise ParseError("explicit grid must be a list of at least two numbers", "grid")
        if g[0] != 0 or any(b <= a for a, b in zip(g[:-1], g[1:])):
            raise ParseError("explicit grid must start at 0 and increase strictly", "grid")
        return [float(x) for x in g]
    if isinstance(g, dict):
        unknown = set(g) - {"t_end", "n_steps", "refine"}
        if unknown:
            raise ParseError(f"unknown keys {sorted(unknown)}", "grid")
        out = {}
        if "t_end" in g:
            out["t_end"] = _positive_float(g["t_end"], "grid.t_end")
        if "n_steps" in g:
            n = g["n_steps"]
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise ParseError(f"expected a positive integer, got {n!r}", "grid.n_steps")
            out["n_steps"] = n
        if "refine" in g:
            out["refine"] = bool(g["refine"])
        return out
    raise ParseError("expected {t_end, n_steps} or a list of times", "grid")


def parse_spec(doc: dict) -> SystemSpec:
    """Validate a decoded JSON document; errors name the offending field."""
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", "$")
    unknown = set(doc) - KNOWN_KEYS
    if unknown:
        raise ParseError(f"unknown keys {sorted(unknown)}", "$")
    for key in ("alpha", "matrix", "forcing"):
        if key not in doc:
            raise ParseError("missing required field", key)
    a = doc["alpha"]
    if isinstance(a, bool) or not isinstance(a, (int, float)) or not 0 < a <= 1:
        raise ParseError(f"alpha must lie in (0, 1], got {a!r}", "alpha")
    M = _json.decode_matrix(doc["matrix"], "matrix")
    d = M.shape[0]
    if M.shape != (d, d):
        raise ParseError(f"matrix must be square, got {M.shape[0]}x{M.shape[1]}", "matrix")
    if not np.all(np.isfinite(M)):
        raise ParseError("matrix entries must be finite", "matrix")
    fl = doc["forcing"]
    if not isinstance(fl, list) or len(fl) != d:
        raise ParseError(f"expected a list of {d} forcing descriptors", "forcing")
    forcing = [forcing_from_dict(x, f"forcing[{i}]") for i, x in enumerate(fl)]
    initial = None
    if doc.get("initial") is not None:
        initial = _json.decode_vector(doc["initial"], "initial")
        if initial.size != d:
            raise ParseError(f"expected {d} entries, got {initial.size}", "initial")
    tols = doc.get("tolerances", {}) or {}
    if not isinstance(tols, dict):
        raise ParseError("expected an object", "tolerances")
    bad = set(tols) - set(TOLERANCE_KEYS)
    if bad:
        raise ParseError(f"unknown keys {sorted(bad)}", "tolerances")
    tols = {k: _positive_float(v, f"tolerances.{k}") for k, v in tols.items()}
    blocks = None
    if doc.get("jordan_blocks") is not None:
        jb = doc["jordan_blocks"]
        if not isinstance(jb, list):
            raise ParseError("expected a list of [eigenvalue, size] pairs", "jordan_blocks")
        blocks = []
        for i, item in enumerate(jb):
            where = f"jordan_blocks[{i}]"
            if not isinstance(item, list) or len(item) != 2 or isinstance(item[1], bool) or not isinstance(item[1], int) or item[1] < 1:
                raise ParseError("expected [eigenvalue, size] with a positive integer size", where)
            blocks.append((_json.decode_complex(item[0], where), item[1]))
        if sum(s for _, s in blocks) != d:
            raise ParseError(f"block sizes must add up to {d}", "jordan_blocks")
    sections = {}
    for key in SECTIONS:
        if key in doc:
            if not isinstance(doc[key], dict):
                raise ParseError("expected an object", key)
            sections[key] = doc[key]
    return SystemSpec(float(a), M, forcing, initial, _parse_grid(doc.get("grid")), tols, blocks, sections)


def loads_spec(text: str) -> SystemSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}", "$") from None
    return parse_spec(doc)


def load_spec(path) -> SystemSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ParseError(f"cannot read spec: {e.strerror}", str(path)) from None
    return loads_spec(text)
