r"""Bounded solutions of hyperbolic systems.

In Jordan coordinates ``y = T^{-1} x`` a hyperbolic system splits into a
stable part, every solution of which is bounded, and an unstable part,
which has exactly one bounded solution. The bounded solutions are therefore
parameterised by the free stable initial data :math:`y_0^s`, with the
unstable initial data pinned to :math:`\bar y^u`:

.. math::

    \mathfrak B(A, f) = \{\, T\,\varphi(\cdot\,; 0, (y_0^s, \bar y^u)) \,\}.

For a scalar unstable eigenvalue
:math:`\bar x_0 = -\lambda^{1/\alpha-1}\int_0^\infty e^{-\lambda^{1/\alpha}\tau} f(\tau)\,d\tau`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma

from . import _json
from .errors import MissingSupNormError, PreconditionError, SectorError
from .forcing import (
    ComplexExponential,
    Constant,
    ForcingFunction,
    LinearImage,
    PiecewiseLinearTable,
    forcing_from_dict,
    linear_image,
)
from .solver import (
    DEFAULT_TOL,
    Trajectory,
    _as_forcing,
    _chain,
    _check_alpha,
    bounded_chain,
    check_grid,
    make_grid,
    uniform_grid,
)
from .spectral import SectorClass, SpectralReport, analyze, classify_eigenvalue, exponential_rate

DEFAULT_TAIL_TOL = 1e-12
DEFAULT_HORIZON = 500.0
DEFAULT_SAMPLES = 7
DEFAULT_MEMBER_STEP = 0.1
DECAY_THRESHOLD = 1e-2
DECAY_RADIUS = 1.0


def _require_unstable(alpha, lam):
    sector = classify_eigenvalue(alpha, lam)
    if sector is not SectorClass.UNSTABLE:
        raise SectorError(f"eigenvalue {complex(lam)} is {sector.value}, not Unstable, for alpha={alpha}")


def tail_cutoff(lam, alpha, sup_norm: float, tail_tol: float) -> float:
    r"""Smallest :math:`T^*` with :math:`\sup|f|\,|\lambda|^{1/\alpha-1}e^{-\rho T^*}/\rho \le` ``tail_tol``/2."""
    rho = exponential_rate(alpha, lam)
    lead = sup_norm * abs(complex(lam)) ** (1.0 / alpha - 1.0) / rho
    if lead <= tail_tol / 2:
        return 0.0
    return math.log(2.0 * lead / tail_tol) / rho


def unstable_init_scalar(lam, alpha, f, tail_tol: float = DEFAULT_TAIL_TOL, method: str = "exact") -> complex:
    """Initial value of the unique bounded solution for an unstable eigenvalue.

    ``method="exact"`` uses the closed-form Laplace transform every forcing
    family carries. ``method="quadrature"`` truncates the improper integral at
    :func:`tail_cutoff` and integrates adaptively; it needs ``sup_norm``.
    """
    _check_alpha(alpha)
    lam = complex(lam)
    _require_unstable(alpha, lam)
    f = _as_forcing(f)
    if not f.is_bounded:
        raise PreconditionError("the forcing must be bounded")
    sup = f.sup_norm
    if sup is None:
        raise MissingSupNormError("tabulated forcing needs a declared sup_norm")
    c = lam ** (1.0 / alpha - 1.0)
    mu = lam ** (1.0 / alpha)
    if method == "exact":
        return -c * complex(f.laplace(mu))
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    t_star = tail_cutoff(lam, alpha, sup, tail_tol)
    if t_star == 0.0:
        return 0j
    points = None
    if isinstance(f, PiecewiseLinearTable):
        inner = f.times[(f.times > 0) & (f.times < t_star)]
        points = list(inner[:: max(1, inner.size // 100)]) or None
    val, _ = quad(
        lambda s: complex(np.exp(-mu * s) * f(np.array([s]))[0]),
        0.0,
        t_star,
        complex_func=True,
        epsabs=tail_tol / (2.0 * abs(c)),
        epsrel=0.0,
        limit=2000,
        points=points,
    )
    return -c * val


def _block_grids(lam, alpha):
    """Three nested uniform grids (steps h, h/2, h/4) for extrapolation."""
    mu = abs(complex(lam)) ** (1.0 / alpha)
    rho = exponential_rate(alpha, lam)
    h = 0.02 * min(1.0, 1.0 / mu)
    t_end = max(1.0, 2.0 / rho)
    n = int(math.ceil(t_end / h))
    return [uniform_grid(t_end, n * k) for k in (1, 2, 4)]


def _extrapolate(v1, v2, p):
    return v2 + (v2 - v1) / (2.0**p - 1.0)


def unstable_init_block(block, alpha, g, tail_tol: float = DEFAULT_TAIL_TOL, grid=None, tol: float = DEFAULT_TOL):
    """Initial values of the bounded solution of an unstable Jordan block ``(lambda, m)``.

    The last coordinate uses :func:`unstable_init_scalar`; every bounded
    coordinate trajectory is then tabulated and added to the forcing of the
    coordinate above it. The tabulated coordinates start like ``t^alpha``,
    so without an explicit ``grid`` the result is extrapolated from three
    step sizes, eliminating the ``h^(1+alpha)`` and ``h^2`` error terms.
    """
    lam, size = complex(block[0]), int(block[1])
    _check_alpha(alpha)
    _require_unstable(alpha, lam)
    g = [_as_forcing(x) for x in g]
    if len(g) != size:
        raise ValueError("one forcing component per block coordinate is required")
    for x in g:
        if x.sup_norm is None:
            raise MissingSupNormError("tabulated forcing needs a declared sup_norm")
    if size == 1:
        return np.array([unstable_init_scalar(lam, alpha, g[0], tail_tol)])
    if grid is not None:
        return bounded_chain((lam, size), alpha, g, check_grid(grid), tol)[1]
    v = [bounded_chain((lam, size), alpha, g, t, tol)[1] for t in _block_grids(lam, alpha)]
    r1 = _extrapolate(v[0], v[1], 1.0 + alpha)
    r2 = _extrapolate(v[1], v[2], 1.0 + alpha)
    out = _extrapolate(r1, r2, 2.0)
    # the last coordinate is exact on every grid
    out[-1] = v[-1][-1]
    return out


# {{{ bounded-solution set


@dataclass(eq=False)
class BoundedSolutionSet:
    """The set of bounded solutions: free stable data plus pinned unstable data."""

    report: SpectralReport
    forcing: list
    unstable_init: np.ndarray
    stable_dim: int
    tol: float = DEFAULT_TOL
    tail_tol: float = DEFAULT_TAIL_TOL
    certification: dict | None = None

    def __post_init__(self):
        self.unstable_init = np.asarray(self.unstable_init, dtype=complex)
        if self.unstable_init.size + self.stable_dim != self.report.dim:
            raise ValueError("unstable and stable dimensions must add up to the system dimension")

    @property
    def dim(self) -> int:
        return self.report.dim

    @property
    def alpha(self) -> float:
        return self.report.alpha

    @property
    def stable_basis(self) -> np.ndarray:
        return self.report.T[:, : self.stable_dim]

    @property
    def g(self) -> list:
        return linear_image(self.report.T_inv, self.forcing)

    def assemble(self, y0s=None) -> np.ndarray:
        """Initial vector in original coordinates for free stable data ``y0s``."""
        y0s = np.zeros(self.stable_dim, dtype=complex) if y0s is None else np.asarray(y0s, dtype=complex).ravel()
        if y0s.size != self.stable_dim:
            raise ValueError(f"stable data must have {self.stable_dim} components")
        y = np.concatenate([y0s, self.unstable_init])
        x = self.report.T @ y
        return x

    def member(self, y0s=None, grid=None, horizon: float = DEFAULT_HORIZON) -> Trajectory:
        """Trajectory of the member with stable data ``y0s``.

        Unstable blocks are integrated as bounded solutions directly, which
        keeps rounding in the pinned data from being amplified.
        """
        y0s = np.zeros(self.stable_dim, dtype=complex) if y0s is None else np.asarray(y0s, dtype=complex).ravel()
        if grid is None:
            grid = make_grid(horizon, int(math.ceil(horizon / DEFAULT_MEMBER_STEP)))
        t = check_grid(grid)
        g = self.g
        Y = np.zeros((t.size, self.dim), dtype=complex)
        err = np.zeros(t.size)
        for b, sl in zip(self.report.blocks, self.report.block_slices()):
            if b.sector is SectorClass.STABLE:
                states, ke, ie, _ = _chain(b.eigenvalue, b.size, self.alpha, g[sl], y0s[sl], t, False)
                err += ke + ie
            else:
                traj, _ = bounded_chain((b.eigenvalue, b.size), self.alpha, g[sl], t, self.tol)
                states = traj.states
                err += traj.est_error
            Y[:, sl] = states
        X = Y @ self.report.T.T
        return Trajectory(t, X, self.alpha, "bounded_member", np.linalg.norm(self.report.T, 2) * err, {"y0s": y0s})

    def sample_stable_data(self, count: int, seed: int = 0, radius: float = 1.0) -> list[np.ndarray]:
        """``count`` stable initial vectors drawn uniformly in norm from the ball of ``radius``."""
        rng = np.random.default_rng(seed)
        out = []
        for k in range(count):
            if self.stable_dim == 0:
                out.append(np.zeros(0, dtype=complex))
                continue
            v = rng.normal(size=self.stable_dim) + 1j * rng.normal(size=self.stable_dim)
            v /= np.linalg.norm(v)
            # the first member is the particular (zero stable data) solution
            out.append(np.zeros(self.stable_dim, dtype=complex) if k == 0 else radius * rng.uniform() * v)
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "BoundedSolutionSet",
            "alpha": self.alpha,
            "spectral_report": self.report.to_dict(),
            "forcing": [f.to_dict() for f in self.forcing],
            "unstable_init": _json.encode_vector(self.unstable_init),
            "stable_dim": self.stable_dim,
            "stable_basis": [_json.encode_vector(col) for col in self.stable_basis.T],
            "particular_initial": _json.encode_vector(self.assemble()),
            "tol": self.tol,
            "tail_tol": self.tail_tol,
            "certification": self.certification,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundedSolutionSet":
        return cls(
            report=SpectralReport.from_dict(d["spectral_report"]),
            forcing=[forcing_from_dict(f) for f in d["forcing"]],
            unstable_init=_json.decode_vector(d["unstable_init"], "unstable_init"),
            stable_dim=int(d["stable_dim"]),
            tol=float(d["tol"]),
            tail_tol=float(d["tail_tol"]),
            certification=d.get("certification"),
        )

    def __eq__(self, other):
        if not isinstance(other, BoundedSolutionSet):
            return NotImplemented
        return (
            self.report == other.report
            and self.forcing == other.forcing
            and np.array_equal(self.unstable_init, other.unstable_init)
            and self.stable_dim == other.stable_dim
            and self.tol == other.tol
            and self.tail_tol == other.tail_tol
            and self.certification == other.certification
        )


@dataclass(eq=False)
class NotHyperbolic:
    """Verdict for a spectrum touching zero or a sector boundary."""

    report: SpectralReport
    witness: dict | None = None

    @property
    def offending(self):
        return self.report.offending

    def to_dict(self) -> dict:
        return {
            "kind": "NotHyperbolic",
            "alpha": self.report.alpha,
            "offending": [
                {"value": _json.encode_complex(e.value), "class": e.sector.value, "multiplicity": e.multiplicity}
                for e in self.offending
            ],
            "spectral_report": self.report.to_dict(),
            "witness": self.witness,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NotHyperbolic":
        return cls(SpectralReport.from_dict(d["spectral_report"]), d.get("witness"))

    def __eq__(self, other):
        if not isinstance(other, NotHyperbolic):
            return NotImplemented
        return self.report == other.report and self.witness == other.witness


def witness_forcing(report: SpectralReport) -> dict:
    """A forcing for which no solution of the system is bounded.

    It drives the last coordinate of the first non-hyperbolic Jordan block:
    with the constant ``Gamma(1 + alpha)`` for a zero eigenvalue, and with the
    resonant exponential for an eigenvalue on a boundary ray.
    """
    alpha = report.alpha
    for b, sl in zip(report.blocks, report.block_slices()):
        if b.sector.hyperbolic:
            continue
        if b.sector is SectorClass.ZERO:
            scalar: ForcingFunction = Constant(gamma(1.0 + alpha))
            law = "last Jordan coordinate grows like t^alpha"
        else:
            r = abs(b.eigenvalue)
            direction = 1 if b.sector is SectorClass.BOUNDARY_PLUS else -1
            scalar = ComplexExponential(r, alpha, 1.0, direction)
            law = "last Jordan coordinate grows linearly in t"
        column = report.T[:, sl.stop - 1]
        forcing = [LinearImage([c], [scalar]) for c in column]
        return {
            "eigenvalue": _json.encode_complex(b.eigenvalue),
            "class": b.sector.value,
            "scalar_forcing": scalar.to_dict(),
            "forcing": [f.to_dict() for f in forcing],
            "growth_law": law,
        }
    raise ValueError("spectrum is hyperbolic; there is no witness")


def bounded_set(
    A,
    alpha,
    f,
    tol: float = DEFAULT_TOL,
    tail_tol: float = DEFAULT_TAIL_TOL,
    jordan_blocks=None,
    witness: bool = False,
    ang_tol: float | None = None,
    mag_tol: float | None = None,
    cond_max: float | None = None,
):
    """The bounded-solution set of ``D^alpha x = A x + f``, or a :class:`NotHyperbolic` verdict."""
    _check_alpha(alpha)
    kw = {}
    if ang_tol is not None:
        kw["ang_tol"] = ang_tol
    if cond_max is not None:
        kw["cond_max"] = cond_max
    report = analyze(A, alpha, mag_tol=mag_tol, jordan_blocks=jordan_blocks, **kw)
    f = [_as_forcing(x) for x in f]
    if len(f) != report.dim:
        raise ValueError(f"forcing must have {report.dim} components")
    if not report.hyperbolic:
        return NotHyperbolic(report, witness_forcing(report) if witness else None)
    g = linear_image(report.T_inv, f)
    parts = []
    for b, sl in zip(report.blocks, report.block_slices()):
        if b.sector is SectorClass.UNSTABLE:
            parts.append(unstable_init_block((b.eigenvalue, b.size), alpha, g[sl], tail_tol, tol=tol))
    unstable = np.concatenate(parts) if parts else np.zeros(0, dtype=complex)
    return BoundedSolutionSet(report, f, unstable, int(report.stable_indices.size), tol, tail_tol)


# }}}


def _forcing_sup(forcing) -> float | None:
    sups = [f.sup_norm for f in forcing]
    if any(s is None for s in sups):
        return None
    return float(np.linalg.norm(sups))


def rate_scale(report: SpectralReport) -> float:
    """Smallest exponential rate among unstable eigenvalues (or ``|lambda|^(1/alpha)`` if none)."""
    a = report.alpha
    unstable = [exponential_rate(a, b.eigenvalue) for b in report.blocks if b.sector is SectorClass.UNSTABLE]
    if unstable:
        return min(unstable)
    return min(abs(b.eigenvalue) ** (1.0 / a) for b in report.blocks)


@dataclass
class Certificate:
    """Outcome of an empirical check over sampled members."""

    kind: str
    horizon: float
    samples: int
    seed: int
    radius: float
    threshold: float
    max_norms: list
    final_norms: list
    envelope_monotone: bool
    passed: bool

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "horizon": self.horizon,
            "samples": self.samples,
            "seed": self.seed,
            "radius": self.radius,
            "threshold": _json.finite_or_none(self.threshold),
            "max_norms": [_json.finite_or_none(x) for x in self.max_norms],
            "final_norms": [_json.finite_or_none(x) for x in self.final_norms],
            "envelope_monotone": self.envelope_monotone,
            "pass": self.passed,
        }


def _window_maxima(times, norms, start, count=10):
    edges = np.linspace(start, times[-1], count + 1)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (times >= lo) & (times <= hi)
        out.append(float(norms[sel].max()))
    return np.array(out)


def certify_boundedness(
    bset: BoundedSolutionSet,
    samples: int = DEFAULT_SAMPLES,
    horizon: float = DEFAULT_HORIZON,
    seed: int = 0,
    radius: float = 1.0,
    bound: float | None = None,
    grid=None,
) -> Certificate:
    r"""Check sampled members stay below ``bound`` on ``[0, horizon]``.

    The default bound is :math:`10(1 + \|f\|_\infty/\rho_{\min})`.
    """
    if bound is None:
        sup = _forcing_sup(bset.forcing)
        bound = math.inf if sup is None else 10.0 * (1.0 + sup / rate_scale(bset.report))
    maxima, finals = [], []
    for y0s in bset.sample_stable_data(samples, seed, radius):
        n = bset.member(y0s, grid=grid, horizon=horizon).norms()
        maxima.append(float(np.max(n)))
        finals.append(float(n[-1]))
    return Certificate(
        "boundedness", float(horizon), samples, seed, radius, float(bound), maxima, finals, True,
        bool(all(m <= bound for m in maxima)),
    )


def decay_check(
    bset: BoundedSolutionSet,
    f=None,
    samples: int = DEFAULT_SAMPLES,
    horizon: float = DEFAULT_HORIZON,
    threshold: float = DECAY_THRESHOLD,
    seed: int = 0,
    radius: float = DECAY_RADIUS,
    tail_start: float = 50.0,
    grid=None,
) -> Certificate:
    """Certify on sampled members that bounded solutions decay when the forcing does.

    Passes when every sampled member ends below ``threshold`` at ``horizon``
    and the window maxima of its norm decrease beyond ``tail_start``.
    """
    forcing = bset.forcing if f is None else [_as_forcing(x) for x in f]
    if not all(x.decays_to_zero for x in forcing):
        raise PreconditionError("decay can only be certified for forcing that tends to zero")
    maxima, finals = [], []
    monotone = True
    for y0s in bset.sample_stable_data(samples, seed, radius):
        traj = bset.member(y0s, grid=grid, horizon=horizon)
        n = traj.norms()
        maxima.append(float(n.max()))
        finals.append(float(n[-1]))
        w = _window_maxima(traj.times, n, min(tail_start, traj.times[-1] / 2))
        if np.any(np.diff(w) > 0):
            monotone = False
    passed = monotone and all(x < threshold for x in finals)
    return Certificate("decay", float(horizon), samples, seed, radius, float(threshold), maxima, finals, monotone, passed)
