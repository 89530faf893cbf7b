r"""Solutions of :math:`D^\alpha x = A x + f(t)` by the variation-of-constants formula.

.. math::

    x(t) = E_\alpha(t^\alpha A)\,x_0
         + \int_0^t (t-\tau)^{\alpha-1} E_{\alpha,\alpha}\big((t-\tau)^\alpha A\big) f(\tau)\,d\tau .

The system is reduced to Jordan blocks (module :mod:`~fracperron.spectral`)
and each block is solved coordinate by coordinate from the bottom of the
chain upward, the solved coordinate entering the next equation as extra
forcing.

Convolution
-----------
The forcing is interpolated piecewise-linearly on the grid and integrated
*exactly* against the whole kernel :math:`K(s) = s^{\alpha-1}E_{\alpha,\alpha}(\lambda s^\alpha)`,
whose first two antiderivatives are

.. math::

    K_1(s) = s^\alpha E_{\alpha,\alpha+1}(\lambda s^\alpha), \qquad
    K_2(s) = s^{\alpha+1} E_{\alpha,\alpha+2}(\lambda s^\alpha).

On a uniform grid the resulting weights depend only on the lag, so the
quadrature is a discrete convolution.

Unstable eigenvalues
--------------------
For :math:`|\arg\lambda| < \alpha\pi/2` the kernel grows like
:math:`e^{\rho t}` and forming :math:`E_\alpha(\lambda t^\alpha)x_0 + \dots` directly
loses everything to cancellation. With :math:`\mu = \lambda^{1/\alpha}`,
:math:`c = \lambda^{1/\alpha - 1}` and the algebraic remainders
:math:`R_{\beta}(z) = E_{\alpha,\beta}(z) - \frac1\alpha z^{(1-\beta)/\alpha}e^{z^{1/\alpha}}`
the solution is rewritten as

.. math::

    x(t) = E_\alpha(\lambda t^\alpha)(x_0 - \bar x_0) + \psi(t), \qquad
    \bar x_0 = -c\int_0^\infty e^{-\mu\tau} f(\tau)\,d\tau,

    \psi(t) = \int_0^t (t-\tau)^{\alpha-1} R_\alpha(\lambda(t-\tau)^\alpha) f(\tau)\,d\tau
      - c\Big[R_1(\lambda t^\alpha)\int_0^\infty e^{-\mu\tau} f\,d\tau
      + \frac1\alpha\int_t^\infty e^{-\mu(\tau - t)} f(\tau)\,d\tau\Big],

in which every term of :math:`\psi` stays bounded. :math:`\psi` is the unique
bounded solution and :math:`\bar x_0 = \psi(0)` its initial value.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gamma

from . import mlf
from .errors import DomainError, PrecisionError, SectorError
from .forcing import Constant, ForcingFunction, LinearImage, PiecewiseLinearTable, is_zero, linear_image
from .spectral import SectorClass, analyze, classify_eigenvalue, exponential_rate

DEFAULT_TOL = 1e-8
DEFAULT_STEP = 0.05
MAX_DEFAULT_STEPS = 20000
REFINE_RATIO = 0.7
REFINE_LEVELS = 12
#: lengths above which the convolution switches to FFT
_FFT_MIN = 1024


# {{{ grids


def uniform_grid(t_end: float, n_steps: int) -> np.ndarray:
    if not (t_end > 0 and n_steps >= 1):
        raise DomainError("grid needs t_end > 0 and n_steps >= 1")
    return np.linspace(0.0, float(t_end), int(n_steps) + 1)


def refined_grid(t_end: float, n_steps: int, ratio: float = REFINE_RATIO, levels: int = REFINE_LEVELS) -> np.ndarray:
    """Uniform grid whose first cell is replaced by a geometric cluster at 0."""
    t = uniform_grid(t_end, n_steps)
    h = t[1]
    head = h * ratio ** np.arange(levels, 0, -1)
    return np.concatenate([[0.0], head, t[1:]])


def make_grid(t_end: float, n_steps: int | None = None, alpha: float | None = None, refine: bool = False) -> np.ndarray:
    if n_steps is None:
        n_steps = int(min(MAX_DEFAULT_STEPS, max(100, math.ceil(t_end / DEFAULT_STEP))))
    if refine:
        return refined_grid(t_end, n_steps)
    return uniform_grid(t_end, n_steps)


def check_grid(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise DomainError("a time grid needs at least two points")
    if t[0] != 0.0:
        raise DomainError("time grids start at 0")
    if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
        raise DomainError("time grid must be finite and strictly increasing")
    return t


def _uniform_step(t):
    h = t[-1] / (t.size - 1)
    if np.allclose(np.diff(t), h, rtol=1e-10, atol=0.0):
        return h
    return None


# }}}


@dataclass(eq=False)
class Trajectory:
    """Grid values of a solution, with the formula that produced them."""

    times: np.ndarray
    states: np.ndarray
    alpha: float
    formula_id: str = "variation_of_constants"
    est_error: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=complex)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def real(self, rtol: float = 1e-8) -> np.ndarray:
        """Real parts, after checking the imaginary residue is negligible."""
        scale = np.maximum(self.norms(), np.finfo(float).tiny)
        resid = np.abs(self.states.imag).max(axis=1)
        if np.any(resid > rtol * scale):
            worst = float(np.max(resid / scale))
            raise PrecisionError(f"imaginary residue {worst:.3g} relative to the state exceeds {rtol:g}")
        return self.states.real

    def to_csv(self, fh=None) -> str | None:
        """CSV with columns ``t, re_x1, im_x1, ...``; returns text when no handle is given."""
        own = fh is None
        if own:
            fh = io.StringIO()
        fh.write(f"# formula_id={self.formula_id} alpha={self.alpha!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        header = ["t"]
        for i in range(self.dim):
            header += [f"re_x{i + 1}", f"im_x{i + 1}"]
        w.writerow(header)
        for t, row in zip(self.times, self.states):
            rec = [repr(float(t))]
            for x in row:
                rec += [repr(float(x.real)), repr(float(x.imag))]
            w.writerow(rec)
        return fh.getvalue() if own else None


# {{{ kernel tables


@dataclass(frozen=True, eq=False)
class _Weights:
    """Product-integration weights by lag: ``y_n = sum_i A_i f_{n-i} + B_i f_{n-i+1}``."""

    A: np.ndarray
    B: np.ndarray
    # K1 errors multiply |f|; K2 errors only multiply the increments of f
    err_f: np.ndarray
    err_df: np.ndarray


def _antiderivatives(lam, alpha, s, split):
    """K1(s), K2(s) (or their split versions) and error bounds."""
    fn = mlf.ml_remainder if split else mlf.mittag_leffler
    z = lam * s**alpha
    K1 = np.zeros(s.shape, dtype=complex)
    K2 = np.zeros(s.shape, dtype=complex)
    e1 = np.zeros(s.shape)
    e2 = np.zeros(s.shape)
    pos = s > 0
    sa = s[pos] ** alpha
    v, e = fn(alpha, alpha + 1.0, z[pos], with_error=True)
    K1[pos], e1[pos] = sa * v, sa * e
    v, e = fn(alpha, alpha + 2.0, z[pos], with_error=True)
    K2[pos], e2[pos] = sa * s[pos] * v, sa * s[pos] * e
    if split:
        # limits at s = 0 of the split antiderivatives
        K1[~pos] = -1.0 / (alpha * lam)
        K2[~pos] = -(lam ** (-1.0 / alpha - 1.0)) / alpha
    return K1, K2, e1, e2


def _weights_from(K1, K2, e1, e2, h):
    """Weights on one lag grid; ``h`` is the cell width (array or scalar)."""
    dK2 = np.diff(K2)
    A = K1[1:] - dK2 / h
    B = dK2 / h - K1[:-1]
    return A, B, e1[1:] + e1[:-1], (e2[1:] + e2[:-1]) / h


@functools.lru_cache(maxsize=32)
def _uniform_weights(lam: complex, alpha: float, h: float, n: int, split: bool) -> _Weights:
    s = h * np.arange(n + 1)
    K1, K2, e1, e2 = _antiderivatives(lam, alpha, s, split)
    return _Weights(*_weights_from(K1, K2, e1, e2, h))


@functools.lru_cache(maxsize=32)
def _uniform_homogeneous(lam: complex, alpha: float, h: float, n: int, split: bool):
    s = h * np.arange(n + 1)
    fn = mlf.ml_remainder if split else mlf.mittag_leffler
    return fn(alpha, 1.0, lam * s**alpha, with_error=True)


def _homogeneous(lam, alpha, t, split):
    h = _uniform_step(t)
    if h is not None:
        return _uniform_homogeneous(complex(lam), float(alpha), float(h), t.size - 1, bool(split))
    fn = mlf.ml_remainder if split else mlf.mittag_leffler
    return fn(alpha, 1.0, lam * t**alpha, with_error=True)


def _conv(a, b, n):
    if min(a.size, b.size) >= _FFT_MIN:
        return fftconvolve(a, b)[:n]
    return np.convolve(a, b)[:n]


def _second_difference(fv):
    d2 = np.zeros(fv.shape)
    if fv.size >= 3:
        d2[1:-1] = np.abs(fv[2:] - 2.0 * fv[1:-1] + fv[:-2])
        d2[0], d2[-1] = d2[1], d2[-2]
    return d2


def _convolve(lam, alpha, t, fv, split):
    """Product-integration values of ``int_0^t K(t - tau) f(tau) dtau`` on the grid.

    Returns ``(values, kernel_error, interpolation_error)``.
    """
    n = t.size - 1
    d2 = _second_difference(fv) / 8.0
    h = _uniform_step(t)
    if h is not None:
        w = _uniform_weights(complex(lam), float(alpha), float(h), n, bool(split))
        A0 = np.concatenate([[0.0], w.A])
        B0 = np.concatenate([[0.0], w.B])
        # the B-weights pair lag i with f_{m-i+1}: convolve against f shifted by one
        y = _conv(A0, fv, n + 1) + _conv(B0, fv[1:], n + 1)
        # the FFT path leaves rounding noise where the integral is empty
        y[0] = 0.0
        kerr = _conv(np.concatenate([[0.0], w.err_f]), np.abs(fv), n + 1).real
        kerr = kerr + _conv(np.concatenate([[0.0], w.err_df]), np.abs(np.diff(fv)), n + 1).real
        mag = np.concatenate([[0.0], np.abs(w.A) + np.abs(w.B)])
        ierr = _conv(mag, d2, n + 1).real
        return y, np.abs(kerr), np.abs(ierr)

    # general grids: one row of lags per output time
    y = np.zeros(n + 1, dtype=complex)
    kerr = np.zeros(n + 1)
    ierr = np.zeros(n + 1)
    for m in range(1, n + 1):
        s = t[m] - t[: m + 1][::-1]  # increasing lags 0 .. t_m
        s[0] = 0.0
        K1, K2, e1, e2 = _antiderivatives(lam, alpha, s, split)
        hs = np.diff(s)
        A, B, err_f, err_df = _weights_from(K1, K2, e1, e2, hs)
        # lag cell i joins s_{i-1}, s_i and corresponds to grid cell (m - i, m - i + 1)
        f_lo = fv[m - 1 :: -1][: m]
        f_hi = fv[m::-1][:m]
        # cell [t_j, t_{j+1}] maps to lags [t_m - t_{j+1}, t_m - t_j]; f_j sits at the larger lag
        y[m] = np.sum(A * f_lo + B * f_hi)
        kerr[m] = np.sum(err_f * np.abs(f_lo) + err_df * np.abs(f_hi - f_lo))
        ierr[m] = np.sum((np.abs(A) + np.abs(B)) * d2[m - 1 :: -1][:m])
    return y, kerr, ierr


# }}}


@dataclass(eq=False)
class ScalarPath:
    values: np.ndarray
    kernel_error: np.ndarray
    interp_error: np.ndarray
    xbar: complex | None = None


def _as_forcing(f) -> ForcingFunction:
    if isinstance(f, ForcingFunction):
        return f
    if np.isscalar(f):
        return Constant(complex(f))
    raise TypeError(f"not a forcing function: {f!r}")


def scalar_path(lam, alpha, f, x0, times, *, bounded: bool = False) -> ScalarPath:
    """Scalar solution on ``times``; with ``bounded=True`` the unique bounded one.

    Unstable eigenvalues always go through the split representation
    (module docstring); other sectors use the formula directly.
    """
    lam = complex(lam)
    f = _as_forcing(f)
    t = check_grid(times)
    sector = classify_eigenvalue(alpha, lam)
    split = sector is SectorClass.UNSTABLE
    if bounded and not split:
        raise SectorError(f"a bounded-solution initial value is defined for unstable eigenvalues only, got {lam}")

    zero_f = is_zero(f)
    if zero_f:
        conv = np.zeros(t.size, dtype=complex)
        kerr = np.zeros(t.size)
        ierr = np.zeros(t.size)
    else:
        conv, kerr, ierr = _convolve(lam, alpha, t, f(t), split)

    H, eH = _homogeneous(lam, alpha, t, split)
    if not split:
        x0 = complex(x0)
        return ScalarPath(H * x0 + conv, kerr + eH * abs(x0), ierr)

    c = lam ** (1.0 / alpha - 1.0)
    mu = lam ** (1.0 / alpha)
    if zero_f:
        L, tail = 0j, np.zeros(t.size, dtype=complex)
    else:
        L = complex(f.laplace(mu))
        tail = f.tail_transform(mu, t)
    xbar = -c * L
    psi = conv - c * (H * L + tail / alpha)
    kerr = kerr + abs(c) * eH * abs(L)
    psi[0] = xbar
    if bounded:
        return ScalarPath(psi, kerr, ierr, xbar)
    delta = complex(x0) - xbar
    if delta != 0:
        E, eE = _homogeneous(lam, alpha, t, False)
        with np.errstate(over="ignore", invalid="ignore"):
            psi = psi + E * delta
            kerr = kerr + eE * abs(delta)
    return ScalarPath(psi, kerr, ierr, xbar)


def _effective(g, above_values, times, bounded_table):
    if above_values is None:
        return g
    table = PiecewiseLinearTable(
        times,
        above_values,
        sup_norm=float(np.max(np.abs(above_values))) if bounded_table else None,
        bounded=bounded_table,
    )
    return LinearImage([1.0, 1.0], [g, table])


def _chain(lam, size, alpha, g, y0, times, bounded):
    states = np.zeros((times.size, size), dtype=complex)
    kerr = np.zeros(times.size)
    ierr = np.zeros(times.size)
    xbar = np.zeros(size, dtype=complex)
    above = None
    for k in range(size - 1, -1, -1):
        eff = _effective(_as_forcing(g[k]), above, times, bounded)
        p = scalar_path(lam, alpha, eff, 0.0 if bounded else y0[k], times, bounded=bounded)
        states[:, k] = p.values
        # errors of the coordinate below feed through the convolution with |K| <= K1-scale
        kerr += p.kernel_error
        ierr += p.interp_error
        if p.xbar is not None:
            xbar[k] = p.xbar
        above = p.values
    return states, kerr, ierr, xbar


def _block_args(block):
    lam, size = block
    return complex(lam), int(size)


def chain_solve(block, alpha, g, y0, grid, tol: float = DEFAULT_TOL) -> Trajectory:
    """Solve one Jordan block ``(lambda, m)`` by descending its chain.

    ``g`` and ``y0`` have ``m`` components; the last coordinate is solved
    first and each solution is tabulated on the grid as extra forcing for
    the coordinate above it.
    """
    lam, size = _block_args(block)
    _check_alpha(alpha)
    t = check_grid(grid)
    if len(g) != size or len(y0) != size:
        raise ValueError("forcing and initial value need one entry per block coordinate")
    states, kerr, ierr, _ = _chain(lam, size, alpha, list(g), np.asarray(y0, dtype=complex), t, False)
    traj = Trajectory(t, states, alpha, "jordan_chain", kerr + ierr, {"kernel_error": kerr, "interp_error": ierr})
    _enforce(traj, kerr, tol)
    return traj


def _extension(lam, alpha, t):
    """Grid extended far enough that truncating the bounded chain tail is negligible."""
    rho = exponential_rate(alpha, lam)
    h = t[-1] - t[-2]
    extra = min(40.0 / rho, 2.0 * t[-1] + 50.0)
    n_extra = int(math.ceil(extra / h))
    return np.concatenate([t, t[-1] + h * np.arange(1, n_extra + 1)])


def bounded_chain(block, alpha, g, grid, tol: float = DEFAULT_TOL):
    """Unique bounded solution of an unstable Jordan block on ``grid``.

    Returns ``(trajectory, initial_values)``. For blocks of size > 1 the
    chain is solved on an extended grid so the tabulated upper coordinates
    are exact far enough past the end of ``grid``.
    """
    lam, size = _block_args(block)
    _check_alpha(alpha)
    t = check_grid(grid)
    if classify_eigenvalue(alpha, lam) is not SectorClass.UNSTABLE:
        raise SectorError(f"eigenvalue {lam} is not in the unstable sector for alpha={alpha}")
    work = _extension(lam, alpha, t) if size > 1 else t
    states, kerr, ierr, xbar = _chain(lam, size, alpha, list(g), None, work, True)
    n = t.size
    traj = Trajectory(
        t, states[:n], alpha, "bounded_unstable_split", (kerr + ierr)[:n],
        {"kernel_error": kerr[:n], "interp_error": ierr[:n]},
    )
    _enforce(traj, kerr[:n], tol)
    return traj, xbar


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"solver needs 0 < alpha < 1, got {alpha!r}")


def _enforce(traj, kerr, tol):
    if not tol > 0:
        raise DomainError("tol must be positive")
    scale = 1.0 + traj.norms()
    with np.errstate(invalid="ignore"):
        rel = kerr / scale
    finite = np.isfinite(traj.states).all(axis=1)
    bad = finite & ~(rel <= tol)
    if np.any(bad):
        i = int(np.argmax(np.where(bad, rel, -np.inf)))
        raise PrecisionError(
            f"kernel evaluation error {rel[i]:.3g} at t={traj.times[i]:g} exceeds tol={tol:g}"
        )


def solve_ivp(A, alpha, f, x0, grid, tol: float = DEFAULT_TOL, jordan_blocks=None) -> Trajectory:
    """Trajectory of ``D^alpha x = A x + f`` from ``x(0) = x0`` on ``grid``.

    ``f`` is a list of scalar forcings, one per coordinate.
    """
    _check_alpha(alpha)
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    d = A.shape[0]
    t = check_grid(grid)
    f = [_as_forcing(fi) for fi in f]
    x0 = np.asarray(x0, dtype=complex).ravel()
    if len(f) != d or x0.size != d:
        raise ValueError(f"forcing and initial value must have {d} components")
    report = analyze(A, alpha, jordan_blocks=jordan_blocks)
    g = linear_image(report.T_inv, f)
    y0 = report.T_inv @ x0
    Y = np.zeros((t.size, d), dtype=complex)
    kerr = np.zeros(t.size)
    ierr = np.zeros(t.size)
    for b, sl in zip(report.blocks, report.block_slices()):
        states, ke, ie, _ = _chain(b.eigenvalue, b.size, alpha, g[sl], y0[sl], t, False)
        Y[:, sl] = states
        kerr += ke
        ierr += ie
    tnorm = np.linalg.norm(report.T, 2)
    with np.errstate(over="ignore", invalid="ignore"):
        X = Y @ report.T.T
    traj = Trajectory(
        t, X, alpha, "variation_of_constants", tnorm * (kerr + ierr),
        {"kernel_error": tnorm * kerr, "interp_error": tnorm * ierr, "condition_number": report.condition_number},
    )
    _enforce(traj, tnorm * kerr, tol)
    return traj


def eval_scalar_solution(lam, alpha, f, x0, t: float, tol: float = DEFAULT_TOL, n_steps: int | None = None) -> complex:
    """Scalar solution at a single time ``t`` (uniform grid on ``[0, t]``)."""
    _check_alpha(alpha)
    if t == 0:
        return complex(x0)
    if t < 0:
        raise DomainError("t must be non-negative")
    if n_steps is None:
        n_steps = int(min(MAX_DEFAULT_STEPS, max(200, math.ceil(t / 0.02))))
    grid = uniform_grid(t, n_steps)
    traj = chain_solve((lam, 1), alpha, [_as_forcing(f)], [x0], grid, tol)
    return complex(traj.states[-1, 0])


def caputo_l1(times, states, alpha) -> np.ndarray:
    r"""L1 approximation of the Caputo derivative on a uniform grid (value 0 at ``t = 0``)."""
    t = check_grid(times)
    h = _uniform_step(t)
    if h is None:
        raise DomainError("the L1 scheme here needs a uniform grid")
    x = np.asarray(states, dtype=complex)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    n = t.size - 1
    k = np.arange(n)
    b = (k + 1.0) ** (1 - alpha) - k ** (1 - alpha)
    dx = np.diff(x, axis=0)
    out = np.zeros_like(x)
    for j in range(x.shape[1]):
        out[1:, j] = np.convolve(b, dx[:, j])[:n]
    out *= h ** (-alpha) / gamma(2 - alpha)
    return out[:, 0] if squeeze else out
