r"""Declarative scalar forcing terms :math:`f(t)` on :math:`[0, \infty)`.

A system forcing is a list with one scalar forcing per coordinate. Every
family evaluates on arrays of times and knows the exponentially weighted tail

.. math::

    \mathcal{L}_\mu f(t) = \int_t^\infty e^{-\mu(\tau - t)} f(\tau)\,d\tau,
    \qquad \operatorname{Re}\mu > 0,

in closed form; ``laplace(mu)`` is its value at ``t = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _json
from .errors import ParseError

# {{{ phi functions


def _phi(x, k):
    r"""phi_1(x) = (1 - e^{-x})/x and phi_2(x) = (1 - e^{-x}(1 + x))/x^2, stable near 0."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 0.5
    out = np.empty_like(x)
    xs = x[small]
    # integral of u^(k-1) e^(-x u) over [0, 1] = sum_j (-x)^j / (j! (j + k))
    acc = np.zeros_like(xs)
    c = np.ones_like(xs)
    for j in range(22):
        acc += c / (j + k)
        c = c * (-xs) / (j + 1)
    out[small] = acc
    xl = x[~small]
    with np.errstate(over="ignore", invalid="ignore"):
        if k == 1:
            out[~small] = -np.expm1(-xl) / xl
        else:
            out[~small] = (1.0 - np.exp(-xl) * (1.0 + xl)) / xl**2
    return out


# }}}


class ForcingFunction:
    """Base class; subclasses are small immutable records."""

    family: str = ""

    def __call__(self, t) -> np.ndarray:
        raise NotImplementedError

    def tail_transform(self, mu: complex, t) -> np.ndarray:
        raise NotImplementedError

    def laplace(self, mu: complex) -> complex:
        return complex(self.tail_transform(mu, np.zeros(1))[0])

    @property
    def sup_norm(self) -> float | None:
        raise NotImplementedError

    @property
    def is_bounded(self) -> bool:
        return True

    @property
    def decays_to_zero(self) -> bool:
        return False

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params()}

    @staticmethod
    def from_dict(d: dict, field: str = "forcing") -> "ForcingFunction":
        return forcing_from_dict(d, field)


def _as_times(t):
    return np.asarray(t, dtype=float)


@dataclass(frozen=True)
class Constant(ForcingFunction):
    value: complex = 0.0
    family = "Constant"

    def __call__(self, t):
        t = _as_times(t)
        return np.full(t.shape, complex(self.value))

    def tail_transform(self, mu, t):
        return np.full(_as_times(t).shape, complex(self.value) / mu)

    @property
    def sup_norm(self):
        return abs(self.value)

    @property
    def decays_to_zero(self):
        return self.value == 0

    def params(self):
        return {"value": _json.encode_complex(self.value)}


@dataclass(frozen=True)
class ExpDecay(ForcingFunction):
    """``amplitude * exp(-rate * t)`` with ``rate >= 0``."""

    amplitude: complex = 1.0
    rate: float = 1.0
    family = "ExpDecay"

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError("ExpDecay rate must be non-negative")

    def __call__(self, t):
        return complex(self.amplitude) * np.exp(-self.rate * _as_times(t))

    def tail_transform(self, mu, t):
        return self(t) / (mu + self.rate)

    @property
    def sup_norm(self):
        return abs(self.amplitude)

    @property
    def decays_to_zero(self):
        return self.rate > 0 or self.amplitude == 0

    def params(self):
        return {"amplitude": _json.encode_complex(self.amplitude), "rate": self.rate}


@dataclass(frozen=True)
class Sinusoid(ForcingFunction):
    """``offset + amplitude * sin(omega * t + phase)``."""

    amplitude: complex = 1.0
    omega: float = 1.0
    phase: float = 0.0
    offset: complex = 0.0
    family = "Sinusoid"

    def __call__(self, t):
        t = _as_times(t)
        return complex(self.offset) + complex(self.amplitude) * np.sin(self.omega * t + self.phase)

    def tail_transform(self, mu, t):
        t = _as_times(t)
        arg = self.omega * t + self.phase
        a = complex(self.amplitude) / 2j
        return (
            complex(self.offset) / mu
            + a * np.exp(1j * arg) / (mu - 1j * self.omega)
            - a * np.exp(-1j * arg) / (mu + 1j * self.omega)
        )

    @property
    def sup_norm(self):
        return abs(self.offset) + abs(self.amplitude)

    @property
    def decays_to_zero(self):
        return self.offset == 0 and self.amplitude == 0

    def params(self):
        return {
            "amplitude": _json.encode_complex(self.amplitude),
            "omega": self.omega,
            "phase": self.phase,
            "offset": _json.encode_complex(self.offset),
        }


@dataclass(frozen=True)
class ComplexExponential(ForcingFunction):
    """``amplitude * exp(i direction r^(1/alpha) t)``, the resonant probe for a boundary ray.

    ``direction = -1`` gives the conjugate probe used for the lower ray.
    """

    r: float = 1.0
    alpha: float = 0.5
    amplitude: complex = 1.0
    direction: int = 1
    family = "ComplexExponential"

    def __post_init__(self):
        if not (self.r > 0 and 0 < self.alpha <= 1):
            raise ValueError("ComplexExponential needs r > 0 and 0 < alpha <= 1")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")

    @property
    def omega(self) -> float:
        return self.direction * self.r ** (1.0 / self.alpha)

    def __call__(self, t):
        return complex(self.amplitude) * np.exp(1j * self.omega * _as_times(t))

    def tail_transform(self, mu, t):
        return self(t) / (mu - 1j * self.omega)

    @property
    def sup_norm(self):
        return abs(self.amplitude)

    @property
    def decays_to_zero(self):
        return self.amplitude == 0

    def params(self):
        return {
            "r": self.r,
            "alpha": self.alpha,
            "amplitude": _json.encode_complex(self.amplitude),
            "direction": self.direction,
        }


class PiecewiseLinearTable(ForcingFunction):
    """Linear interpolation through ``(times, values)``; constant beyond both ends.

    ``sup_norm`` is whatever the producer declares (``None`` when unknown).
    """

    family = "PiecewiseLinearTable"

    def __init__(self, times, values, sup_norm=None, bounded=True, decays=False):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=complex)
        if self.times.ndim != 1 or self.times.shape != self.values.shape or self.times.size < 1:
            raise ValueError("table needs matching 1-d times and values")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("table times must be strictly increasing")
        self._sup = None if sup_norm is None else float(sup_norm)
        self._bounded = bool(bounded)
        self._decays = bool(decays)
        self._tail_cache: dict = {}

    def __call__(self, t):
        t = _as_times(t)
        return np.interp(t, self.times, self.values.real) + 1j * np.interp(t, self.times, self.values.imag)

    def _node_tails(self, mu):
        key = complex(mu)
        if key not in self._tail_cache:
            h = np.diff(self.times)
            v = self.values
            x = mu * h
            e = np.exp(-x)
            cell = v[:-1] * h * _phi(x, 1) + (v[1:] - v[:-1]) * h * _phi(x, 2)
            J = np.empty(v.shape, dtype=complex)
            J[-1] = v[-1] / mu
            for i in range(v.size - 2, -1, -1):
                J[i] = e[i] * J[i + 1] + cell[i]
            self._tail_cache = {key: J}
        return self._tail_cache[key]

    def tail_transform(self, mu, t):
        t = _as_times(t)
        shape = t.shape
        t = t.ravel()
        J = self._node_tails(mu)
        out = np.empty(t.shape, dtype=complex)
        tt = self.times
        after = t >= tt[-1]
        out[after] = self.values[-1] / mu
        inside = ~after
        if np.any(inside):
            tq = np.maximum(t[inside], tt[0])
            i = np.clip(np.searchsorted(tt, tq, side="right") - 1, 0, tt.size - 2)
            L = tt[i + 1] - tq
            x = mu * L
            ft = self(tq)
            part = ft * L * _phi(x, 1) + (self.values[i + 1] - ft) * L * _phi(x, 2)
            res = part + np.exp(-x) * J[i + 1]
            # before the first node the table is constant
            pre = t[inside] < tt[0]
            if np.any(pre):
                d = tt[0] - t[inside][pre]
                res[pre] = self.values[0] * d * _phi(mu * d, 1) + np.exp(-mu * d) * J[0]
            out[inside] = res
        return out.reshape(shape)

    @property
    def sup_norm(self):
        return self._sup

    @property
    def is_bounded(self):
        return self._bounded

    @property
    def decays_to_zero(self):
        return self._decays

    def params(self):
        return {
            "times": [float(x) for x in self.times],
            "values": _json.encode_vector(self.values),
            "sup_norm": self._sup,
            "bounded": self._bounded,
            "decays": self._decays,
        }

    def __eq__(self, other):
        if not isinstance(other, PiecewiseLinearTable):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
            and self._sup == other._sup
            and self._bounded == other._bounded
            and self._decays == other._decays
        )

    __hash__ = None

    def __repr__(self):
        return f"PiecewiseLinearTable(n={self.times.size}, t_end={self.times[-1]:g})"


class LinearImage(ForcingFunction):
    """``sum_j coefficients[j] * components[j](t)``."""

    family = "LinearImage"

    def __init__(self, coefficients, components):
        self.coefficients = np.asarray(coefficients, dtype=complex).ravel()
        self.components = tuple(components)
        if self.coefficients.size != len(self.components):
            raise ValueError("one coefficient per component is required")

    def _active(self):
        return [(c, f) for c, f in zip(self.coefficients, self.components) if c != 0]

    def __call__(self, t):
        t = _as_times(t)
        out = np.zeros(t.shape, dtype=complex)
        for c, f in self._active():
            out += c * f(t)
        return out

    def tail_transform(self, mu, t):
        t = _as_times(t)
        out = np.zeros(t.shape, dtype=complex)
        for c, f in self._active():
            out += c * f.tail_transform(mu, t)
        return out

    @property
    def sup_norm(self):
        total = 0.0
        for c, f in self._active():
            if f.sup_norm is None:
                return None
            total += abs(c) * f.sup_norm
        return total

    @property
    def is_bounded(self):
        return all(f.is_bounded for _, f in self._active())

    @property
    def decays_to_zero(self):
        return all(f.decays_to_zero for _, f in self._active())

    def params(self):
        return {
            "coefficients": _json.encode_vector(self.coefficients),
            "components": [f.to_dict() for f in self.components],
        }

    def __eq__(self, other):
        if not isinstance(other, LinearImage):
            return NotImplemented
        return np.array_equal(self.coefficients, other.coefficients) and self.components == other.components

    __hash__ = None

    def __repr__(self):
        return f"LinearImage({self.coefficients.tolist()}, {list(self.components)})"


def linear_image(M, forcing) -> list[ForcingFunction]:
    """Componentwise forcing of ``M @ f`` for a matrix ``M`` and a forcing list ``f``."""
    M = np.asarray(M, dtype=complex)
    return [LinearImage(row, forcing) for row in M]


def evaluate(forcing, t) -> np.ndarray:
    """Values of a forcing list on ``t``, shape ``(len(t), d)``."""
    t = _as_times(t)
    return np.stack([f(t) for f in forcing], axis=-1)


def is_zero(f: ForcingFunction) -> bool:
    if isinstance(f, Constant):
        return f.value == 0
    if isinstance(f, (ExpDecay, ComplexExponential)):
        return f.amplitude == 0
    if isinstance(f, Sinusoid):
        return f.amplitude == 0 and f.offset == 0
    if isinstance(f, LinearImage):
        return all(is_zero(g) for _, g in f._active())
    if isinstance(f, PiecewiseLinearTable):
        return bool(np.all(f.values == 0))
    return False


# {{{ JSON


def _c(params, key, field, default=None):
    if key not in params:
        if default is None:
            raise ParseError(f"missing parameter {key!r}", field)
        return default
    return _json.decode_complex(params[key], f"{field}.params.{key}")


def _f(params, key, field, default=None):
    if key not in params:
        if default is None:
            raise ParseError(f"missing parameter {key!r}", field)
        return float(default)
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"parameter {key!r} must be a real number", field)
    return float(v)


def forcing_from_dict(d, field: str = "forcing") -> ForcingFunction:
    if not isinstance(d, dict) or "family" not in d:
        raise ParseError("forcing descriptor needs a 'family' key", field)
    fam = d["family"]
    p = d.get("params", {})
    if not isinstance(p, dict):
        raise ParseError("params must be an object", field)
    try:
        if fam == "Constant":
            return Constant(_c(p, "value", field))
        if fam == "ExpDecay":
            return ExpDecay(_c(p, "amplitude", field, 1.0), _f(p, "rate", field, 1.0))
        if fam == "Sinusoid":
            return Sinusoid(
                _c(p, "amplitude", field, 1.0),
                _f(p, "omega", field, 1.0),
                _f(p, "phase", field, 0.0),
                _c(p, "offset", field, 0.0),
            )
        if fam == "ComplexExponential":
            return ComplexExponential(
                _f(p, "r", field), _f(p, "alpha", field), _c(p, "amplitude", field, 1.0), int(p.get("direction", 1))
            )
        if fam == "PiecewiseLinearTable":
            if "times" not in p or "values" not in p:
                raise ParseError("table needs 'times' and 'values'", field)
            return PiecewiseLinearTable(
                [float(x) for x in p["times"]],
                _json.decode_vector(p["values"], f"{field}.params.values"),
                p.get("sup_norm"),
                p.get("bounded", True),
                p.get("decays", False),
            )
        if fam == "LinearImage":
            comps = [forcing_from_dict(c, f"{field}.params.components[{i}]") for i, c in enumerate(p["components"])]
            return LinearImage(_json.decode_vector(p["coefficients"], f"{field}.params.coefficients"), comps)
    except ParseError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ParseError(str(exc), field) from exc
    raise ParseError(f"unknown forcing family {fam!r}", field)


# }}}
