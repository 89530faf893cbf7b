r"""Numerical checks of the Mittag-Leffler estimates and the non-hyperbolic witnesses.

Each ``verify_*`` function samples a quantity the theory bounds (or sends to
a limit) on a grid of times and returns an :class:`EstimateReport` carrying
the samples, an empirical constant and a pass flag. The constants in the
estimates are existential, so they are measured and reported, never asserted.

Lemma identifiers
-----------------
``L3i_E``
    :math:`|E_\alpha(\lambda t^\alpha) - \frac1\alpha e^{\lambda^{1/\alpha}t}|\,t^\alpha`, unstable :math:`\lambda`.
``L3i_Ealphaalpha``
    :math:`|t^{\alpha-1}E_{\alpha,\alpha}(\lambda t^\alpha) - \frac1\alpha\lambda^{1/\alpha-1}e^{\lambda^{1/\alpha}t}|\,t^{\alpha+1}`, unstable :math:`\lambda`.
``L3ii``
    :math:`|t^{\alpha-1}E_{\alpha,\alpha}(\lambda t^\alpha)|\,t^{\alpha+1}`, stable :math:`\lambda`.
``L4i_a``, ``L4i_b``, ``L4ii``
    The three integral bounds (two for unstable, one for stable :math:`\lambda`).
``LimitLemma``
    Convergence of the normalised convolution to :math:`\lambda^{1/\alpha-1}\int_0^\infty e^{-\lambda^{1/\alpha}\tau}g\,d\tau`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma, roots_legendre

from . import _json
from .errors import PreconditionError, SectorError
from .forcing import ComplexExponential, Constant, forcing_from_dict
from .mlf import mittag_leffler, ml_remainder
from .solver import _as_forcing, _check_alpha, _convolve, chain_solve, uniform_grid
from .spectral import SectorClass, classify_eigenvalue, exponential_rate

PER_DECADE = 25
SLOPE_TOL = 0.1
BOUND_RATIO = 1.2
STABILIZATION = 0.05
LIMIT_TOL = 1e-4
#: gaps below this (relative to 1 + |RHS|) are rounding noise
LIMIT_NOISE = 1e-12
GL_NODES = 16


class LemmaId(str, enum.Enum):
    L3I_E = "L3i_E"
    L3I_EALPHAALPHA = "L3i_Ealphaalpha"
    L3II = "L3ii"
    L4I_A = "L4i_a"
    L4I_B = "L4i_b"
    L4II = "L4ii"
    LIMIT = "LimitLemma"


@dataclass(eq=False)
class EstimateReport:
    lemma_id: LemmaId
    alpha: float
    lam: complex
    t_grid: np.ndarray
    measured: np.ndarray
    empirical_constant: float
    passed: bool
    slope: float | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lemma_id": self.lemma_id.value,
            "alpha": self.alpha,
            "lambda": _json.encode_complex(self.lam),
            "t_grid": [float(x) for x in self.t_grid],
            "measured": [_json.finite_or_none(x) for x in self.measured],
            "empirical_constant": _json.finite_or_none(self.empirical_constant),
            "pass": self.passed,
            "slope": None if self.slope is None else _json.finite_or_none(self.slope),
            "details": self.details,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateReport":
        return cls(
            lemma_id=LemmaId(d["lemma_id"]),
            alpha=float(d["alpha"]),
            lam=_json.decode_complex(d["lambda"]),
            t_grid=np.array(d["t_grid"], dtype=float),
            measured=np.array([_json.decode_float(x) for x in d["measured"]], dtype=float),
            empirical_constant=_json.decode_float(d["empirical_constant"]),
            passed=bool(d["pass"]),
            slope=None if d.get("slope") is None else _json.decode_float(d["slope"]),
            details=dict(d.get("details", {})),
        )

    def __eq__(self, other):
        if not isinstance(other, EstimateReport):
            return NotImplemented
        return (
            self.lemma_id == other.lemma_id
            and self.alpha == other.alpha
            and self.lam == other.lam
            and np.array_equal(self.t_grid, other.t_grid)
            and np.array_equal(self.measured, other.measured)
            and self.empirical_constant == other.empirical_constant
            and self.passed == other.passed
            and self.slope == other.slope
            and self.details == other.details
        )

    def to_csv(self) -> str:
        lines = ["t,measured"]
        lines += [f"{t!r},{m!r}" for t, m in zip(self.t_grid.tolist(), self.measured.tolist())]
        return "\n".join(lines) + "\n"


def log_grid(t_min: float, t_max: float, per_decade: int = PER_DECADE) -> np.ndarray:
    decades = math.log10(t_max / t_min)
    n = max(2, int(round(decades * per_decade)) + 1)
    return np.logspace(math.log10(t_min), math.log10(t_max), n)


def fit_loglog_slope(t, y, t_from: float) -> float:
    sel = (t >= t_from) & (y > 0) & np.isfinite(y)
    if sel.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(t[sel]), np.log(y[sel]), 1)[0])


def running_max_growth(t, values, t_from: float) -> float:
    """Relative increase of the running maximum between ``t_from`` and the end."""
    run = np.maximum.accumulate(values)
    start = run[np.searchsorted(t, t_from)]
    return float(run[-1] / start - 1.0) if start > 0 else math.inf


def _sector_guard(alpha, lam, wanted: SectorClass, what: str):
    got = classify_eigenvalue(alpha, lam)
    if got is not wanted:
        raise SectorError(f"{what} needs a {wanted.value} eigenvalue; {complex(lam)} is {got.value} for alpha={alpha}")


# {{{ Lemma 3


_L3_PARTS = {"i": LemmaId.L3I_E, "i_E": LemmaId.L3I_E, "i_Ealphaalpha": LemmaId.L3I_EALPHAALPHA, "ii": LemmaId.L3II}


def verify_lemma3(alpha, lam, t_max: float = 1000.0, part: str | None = None, per_decade: int = PER_DECADE) -> EstimateReport:
    """Scaled Mittag-Leffler decay on a log grid in ``[1, t_max]``.

    ``part`` is ``"i"`` (alias ``"i_E"``), ``"i_Ealphaalpha"`` or ``"ii"``;
    by default it follows the sector of ``lam``. Passes when the log-log
    slope of the raw quantity beyond ``t = 10`` is within 0.1 of the
    predicted one and the scaled quantity's maximum over the last decade is
    at most 1.2 times that over the first.
    """
    _check_alpha(alpha)
    lam = complex(lam)
    if t_max < 10:
        raise ValueError("t_max must be at least 10")
    if part is None:
        sector = classify_eigenvalue(alpha, lam)
        part = {SectorClass.UNSTABLE: "i", SectorClass.STABLE: "ii"}.get(sector)
        if part is None:
            raise SectorError(f"{lam} is {sector.value}; the decay estimates need a hyperbolic eigenvalue")
    lemma = _L3_PARTS[part]
    t = log_grid(1.0, t_max, per_decade)
    z = lam * t**alpha
    if lemma is LemmaId.L3II:
        _sector_guard(alpha, lam, SectorClass.STABLE, "part (ii)")
        v, e = mittag_leffler(alpha, alpha, z, with_error=True)
        raw, power = np.abs(t ** (alpha - 1) * v), alpha + 1
        err = t ** (alpha - 1) * e
    else:
        _sector_guard(alpha, lam, SectorClass.UNSTABLE, "part (i)")
        if lemma is LemmaId.L3I_E:
            v, e = ml_remainder(alpha, 1.0, z, with_error=True)
            raw, power, err = np.abs(v), alpha, e
        else:
            v, e = ml_remainder(alpha, alpha, z, with_error=True)
            raw, power = np.abs(t ** (alpha - 1) * v), alpha + 1
            err = t ** (alpha - 1) * e
    scaled = raw * t**power
    slope = fit_loglog_slope(t, raw, 10.0)
    first = float(scaled[t <= 10.0 * (1 + 1e-12)].max())
    last = float(scaled[t >= t_max / 10.0 * (1 - 1e-12)].max())
    growth = running_max_growth(t, scaled, t_max / 10.0)
    passed = bool(abs(slope + power) <= SLOPE_TOL and last <= BOUND_RATIO * first)
    return EstimateReport(
        lemma, float(alpha), lam, t, scaled, float(scaled.max()), passed, slope,
        {
            "target_slope": -power,
            "slope_tol": SLOPE_TOL,
            "slope_fit_from": 10.0,
            "first_decade_max": first,
            "last_decade_max": last,
            "bound_ratio": BOUND_RATIO,
            "running_max_growth_last_decade": growth,
            "max_evaluation_error": float(np.max(err * t**power)),
        },
    )


# }}}


# {{{ Lemma 4


def _gl(nodes=GL_NODES):
    x, w = roots_legendre(nodes)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_nodes(edges, nodes=GL_NODES):
    x, w = _gl(nodes)
    a, b = edges[:-1, None], edges[1:, None]
    s = (a + (b - a) * x[None, :]).ravel()
    ws = ((b - a) * w[None, :]).ravel()
    return s, ws


def _snap_grid(t_max, per_decade, panel):
    t = log_grid(1.0, t_max, per_decade)
    t = np.unique(np.maximum(1.0, np.round(t / panel) * panel))
    return t


def verify_lemma4(
    alpha,
    lam,
    t_max: float = 1000.0,
    part: str | None = None,
    per_decade: int = PER_DECADE,
    panel: float | None = None,
    nodes: int = GL_NODES,
) -> EstimateReport:
    r"""Integral bounds on a log grid in ``[1, t_max]``.

    ``part`` is ``"i_a"``, ``"i_b"`` or ``"ii"`` (default: ``"i_b"`` for
    unstable, ``"ii"`` for stable eigenvalues). Integrals over ``[0, 1]`` use
    ``u = s^alpha``, which removes the weak singularity; the rest uses
    composite Gauss-Legendre panels of width ``panel``. Passes when the
    running maximum grows by less than 5% over the last decade.
    """
    _check_alpha(alpha)
    lam = complex(lam)
    sector = classify_eigenvalue(alpha, lam)
    if part is None:
        part = {SectorClass.UNSTABLE: "i_b", SectorClass.STABLE: "ii"}.get(sector)
        if part is None:
            raise SectorError(f"{lam} is {sector.value}; the integral estimates need a hyperbolic eigenvalue")
    mu = lam ** (1.0 / alpha)
    c = lam ** (1.0 / alpha - 1.0)
    if panel is None:
        panel = min(0.5, 2.0 / abs(mu))
    t = _snap_grid(t_max, per_decade, panel)

    if part == "i_a":
        _sector_guard(alpha, lam, SectorClass.UNSTABLE, "part (i)")
        lemma = LemmaId.L4I_A
        measured = lemma4_tail(alpha, lam, t)
    elif part in ("i_b", "ii"):
        if part == "ii":
            _sector_guard(alpha, lam, SectorClass.STABLE, "part (ii)")
            lemma = LemmaId.L4II
        else:
            _sector_guard(alpha, lam, SectorClass.UNSTABLE, "part (i)")
            lemma = LemmaId.L4I_B
        xu, wu = _gl(nodes)
        # [0, 1] in u = s^alpha; then panels on [1, t_max]
        n_panels = int(round((t[-1] - 1.0) / panel))
        edges = 1.0 + panel * np.arange(n_panels + 1)
        s, ws = _panel_nodes(edges, nodes)
        if lemma is LemmaId.L4II:
            head = np.sum(wu * np.abs(mittag_leffler(alpha, alpha, lam * xu))) / alpha
            body = np.abs(s ** (alpha - 1) * mittag_leffler(alpha, alpha, lam * s**alpha)) * ws
            cum = np.concatenate([[0.0], np.cumsum(body.reshape(n_panels, nodes).sum(axis=1))])
            idx = np.round((t - 1.0) / panel).astype(int)
            measured = head + cum[idx]
        else:
            rem_u = ml_remainder(alpha, alpha, lam * xu)
            su = xu ** (1.0 / alpha)
            rk = s ** (alpha - 1) * ml_remainder(alpha, alpha, lam * s**alpha)
            re_t = ml_remainder(alpha, 1.0, lam * t**alpha)
            measured = np.empty(t.size)
            for k, tk in enumerate(t):
                x_head = c * re_t[k] * np.exp(-mu * (tk - su)) * su ** (1.0 - alpha)
                head = np.sum(wu * np.abs(rem_u - x_head)) / alpha
                sel = s < tk
                body = np.abs(rk[sel] - c * re_t[k] * np.exp(-mu * (tk - s[sel])))
                measured[k] = head + np.sum(body * ws[sel])
    else:
        raise ValueError(f"unknown part {part!r}")

    growth = running_max_growth(t, measured, t[-1] / 10.0)
    passed = bool(np.all(np.isfinite(measured)) and growth < STABILIZATION)
    return EstimateReport(
        lemma, float(alpha), lam, t, measured, float(np.max(measured)), passed, None,
        {"running_max_growth_last_decade": growth, "stabilization": STABILIZATION, "panel": panel, "nodes": nodes},
    )


def lemma4_tail(alpha, lam, t) -> np.ndarray:
    r"""Closed form of :math:`\int_t^\infty|\lambda^{1/\alpha-1}E_\alpha(\lambda t^\alpha)e^{-\lambda^{1/\alpha}\tau}|\,d\tau`.

    Equal to :math:`|\lambda|^{1/\alpha-1}|E_\alpha(\lambda t^\alpha)e^{-\mu t}|/\rho`; the product is
    formed as :math:`1/\alpha + R(\lambda t^\alpha)e^{-\mu t}` so it never overflows.
    """
    lam = complex(lam)
    t = np.asarray(t, dtype=float)
    mu = lam ** (1.0 / alpha)
    rho = exponential_rate(alpha, lam)
    scaled_e = 1.0 / alpha + ml_remainder(alpha, 1.0, lam * t**alpha) * np.exp(-mu * t)
    return abs(lam) ** (1.0 / alpha - 1.0) * np.abs(scaled_e) / rho


# }}}


def verify_limit_lemma(alpha, lam, g, t_max: float = 100.0, n_steps: int | None = None, per_decade: int = 5) -> EstimateReport:
    r"""Gap between the normalised convolution and its limit at increasing times.

    Both numerator and denominator are multiplied by :math:`e^{-\mu t}` so the
    quotient is formed from bounded quantities; the convolution uses the
    solver's product integration. Passes when the final gap is at most
    ``1e-4 (1 + |RHS|)`` and the gap does not increase over the last three
    samples (gaps below the rounding floor ``1e-12 (1 + |RHS|)`` count as equal).
    """
    _check_alpha(alpha)
    lam = complex(lam)
    _sector_guard(alpha, lam, SectorClass.UNSTABLE, "the limit lemma")
    g = _as_forcing(g)
    if not g.is_bounded:
        raise PreconditionError("g must be bounded")
    mu = lam ** (1.0 / alpha)
    c = lam ** (1.0 / alpha - 1.0)
    L = complex(g.laplace(mu))
    rhs = c * L
    if n_steps is None:
        n_steps = int(math.ceil(t_max / min(0.01, 0.1 / abs(mu))))
    grid = uniform_grid(t_max, n_steps)
    conv_r, _, _ = _convolve(lam, alpha, grid, g(grid), True)
    samples = log_grid(1.0, t_max, per_decade)
    idx = np.unique(np.clip(np.round(samples / (t_max / n_steps)).astype(int), 1, n_steps))
    ts = grid[idx]
    decay = np.exp(-mu * ts)
    num = (c / alpha) * (L - decay * g.tail_transform(mu, ts)) + decay * conv_r[idx]
    den = 1.0 / alpha + ml_remainder(alpha, 1.0, lam * ts**alpha) * decay
    lhs = num / den
    gap = np.abs(lhs - rhs)
    floor = LIMIT_NOISE * (1.0 + abs(rhs))
    tail = gap[-3:]
    monotone = bool(all(b <= max(a, floor) for a, b in zip(tail[:-1], tail[1:])))
    passed = bool(gap[-1] <= LIMIT_TOL * (1.0 + abs(rhs)) and monotone)
    return EstimateReport(
        LemmaId.LIMIT, float(alpha), lam, ts, gap, float(gap.max()), passed, None,
        {
            "rhs": _json.encode_complex(rhs),
            "lhs": [_json.encode_complex(x) for x in lhs],
            "tolerance": LIMIT_TOL,
            "noise_floor": floor,
            "monotone_last_three": monotone,
            "n_steps": n_steps,
            "forcing": g.to_dict(),
        },
    )


# {{{ witnesses


@dataclass(eq=False)
class WitnessReport:
    kind: str
    alpha: float
    system: dict
    metrics: dict
    passed: bool
    trajectory: object = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha, "system": self.system, "metrics": self.metrics, "pass": self.passed}


def _system(alpha, lam, forcing, x0, t_end, n_steps):
    return {
        "alpha": alpha,
        "matrix": [[_json.encode_complex(lam)]],
        "forcing": [forcing.to_dict()],
        "initial": [_json.encode_complex(x0)],
        "grid": {"t_end": t_end, "n_steps": n_steps},
    }


def witness_trivial(alpha, x0: complex = 0.0, t_end: float = 100.0, n_steps: int = 2000, tol: float = 1e-6) -> WitnessReport:
    r"""Zero matrix with forcing :math:`\Gamma(1+\alpha)`: every solution is :math:`x_0 + t^\alpha`."""
    _check_alpha(alpha)
    f = Constant(gamma(1.0 + alpha))
    grid = uniform_grid(t_end, n_steps)
    traj = chain_solve((0.0, 1), alpha, [f], [x0], grid)
    exact = complex(x0) + grid**alpha
    dev = float(np.max(np.abs(traj.states[:, 0] - exact)))
    grows = bool(abs(traj.states[-1, 0]) > abs(traj.states[n_steps // 2, 0]) > abs(complex(x0)) - 1e-12)
    return WitnessReport(
        "trivial", float(alpha), _system(alpha, 0.0, f, x0, t_end, n_steps),
        {"growth_law": "x0 + t^alpha", "max_deviation": dev, "tolerance": tol, "final_value": _json.encode_complex(traj.states[-1, 0])},
        bool(dev <= tol and grows), traj,
    )


def resonant_leading_term(alpha, lam, t):
    r""":math:`\frac{\lambda^{(1-\alpha)/\alpha}}{\alpha}(t-1)e^{\lambda^{1/\alpha}t}`, the dominant part of the resonant solution."""
    lam = complex(lam)
    t = np.asarray(t, dtype=float)
    return lam ** ((1.0 - alpha) / alpha) / alpha * (t - 1.0) * np.exp(lam ** (1.0 / alpha) * t)


def witness_resonant(
    alpha,
    r: float = 1.0,
    x0: complex = 0.0,
    t_end: float = 200.0,
    n_steps: int | None = None,
    window=(50.0, 200.0),
    rel_tol: float = 0.2,
) -> WitnessReport:
    r"""Boundary eigenvalue :math:`re^{i\alpha\pi/2}` driven by :math:`e^{ir^{1/\alpha}t}`.

    Fits :math:`|\varphi(t)|` against ``t`` over ``window`` and compares the
    slope and :math:`|\varphi(t_{end})|/t_{end}` with :math:`r^{(1-\alpha)/\alpha}/\alpha`.
    """
    _check_alpha(alpha)
    if not r > 0:
        raise ValueError("r must be positive")
    lam = r * complex(math.cos(alpha * math.pi / 2), math.sin(alpha * math.pi / 2))
    sector = classify_eigenvalue(alpha, lam)
    f = ComplexExponential(r, alpha)
    omega = abs(f.omega)
    if n_steps is None:
        n_steps = int(math.ceil(t_end / min(0.05, 0.1 / omega)))
    grid = uniform_grid(t_end, n_steps)
    traj = chain_solve((lam, 1), alpha, [f], [x0], grid)
    phi = np.abs(traj.states[:, 0])
    predicted = r ** ((1.0 - alpha) / alpha) / alpha
    sel = (grid >= window[0]) & (grid <= window[1])
    slope = float(np.polyfit(grid[sel], phi[sel], 1)[0])
    ratio_end = float(phi[-1] / grid[-1])
    quad_ratio = phi[sel] / grid[sel] ** 2
    passed = bool(abs(ratio_end - predicted) <= rel_tol * predicted and quad_ratio[-1] < quad_ratio[0])
    return WitnessReport(
        "resonant", float(alpha), _system(alpha, lam, f, x0, t_end, n_steps),
        {
            "eigenvalue": _json.encode_complex(lam),
            "sector": sector.value,
            "predicted_slope": predicted,
            "fitted_slope": slope,
            "ratio_at_end": ratio_end,
            "relative_deviation": abs(ratio_end - predicted) / predicted,
            "quadratic_ratio_start": float(quad_ratio[0]),
            "quadratic_ratio_end": float(quad_ratio[-1]),
            "remainder_note": "the remainder beyond the leading term grows at most like log t",
            "window": list(window),
        },
        passed, traj,
    )


# }}}


def run_verification(lemma: str, alpha, lam, t_max=None, g=None, part=None) -> EstimateReport:
    """Dispatch by lemma name (``lemma3``, ``lemma4``, ``limit``) or by a :class:`LemmaId` value."""
    ids = {m.value: m for m in LemmaId}
    if lemma in ids:
        lid = ids[lemma]
        if lid is LemmaId.LIMIT:
            lemma = "limit"
        else:
            part = {
                LemmaId.L3I_E: "i", LemmaId.L3I_EALPHAALPHA: "i_Ealphaalpha", LemmaId.L3II: "ii",
                LemmaId.L4I_A: "i_a", LemmaId.L4I_B: "i_b", LemmaId.L4II: "ii",
            }[lid]
            lemma = "lemma3" if lid.value.startswith("L3") else "lemma4"
    kw = {} if t_max is None else {"t_max": t_max}
    if lemma == "lemma3":
        return verify_lemma3(alpha, lam, part=part, **kw)
    if lemma == "lemma4":
        return verify_lemma4(alpha, lam, part=part, **kw)
    if lemma == "limit":
        g = Constant(1.0) if g is None else (forcing_from_dict(g) if isinstance(g, dict) else g)
        return verify_limit_lemma(alpha, lam, g, **kw)
    raise ValueError(f"unknown lemma {lemma!r}")
