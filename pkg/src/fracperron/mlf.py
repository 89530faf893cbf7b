r"""Two-parameter Mittag-Leffler function.

.. math::

    E_{\alpha,\beta}(z) = \sum_{k=0}^\infty \frac{z^k}{\Gamma(\alpha k + \beta)},
    \qquad 0 < \alpha \le 1,\ \beta > 0.

Three evaluation routes are combined, chosen per argument:

* the truncated Taylor series in double precision, with a rigorous tail
  bound, used when cancellation between terms is mild;
* the large-argument expansion

  .. math::

      E_{\alpha,\beta}(z) = \frac{1}{\alpha} z^{(1-\beta)/\alpha} e^{z^{1/\alpha}}
          - \sum_{k=1}^{m-1} \frac{z^{-k}}{\Gamma(\beta - \alpha k)} + O(|z|^{-m}),

  where the exponential term is kept for :math:`|\arg z| < \alpha\pi` and
  the algebraic sum is truncated at its smallest term;
* the Taylor series in extended precision (``gmpy2``) for the annulus
  where neither of the above reaches the requested accuracy.

Besides :math:`E_{\alpha,\beta}` itself, :func:`ml_remainder` returns the
*algebraic remainder* :math:`E_{\alpha,\beta}(z) - \frac{1}{\alpha}
z^{(1-\beta)/\alpha} e^{z^{1/\alpha}}` without forming the (possibly huge)
difference in floating point. The bounded-solution machinery depends on it.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import gmpy2
import numpy as np
from scipy.special import gammaln, rgamma

from .errors import DefectiveMatrixError, DomainError, PrecisionError

EPS = float(np.finfo(float).eps)
#: relative accuracy below which no regime is asked to go
PRECISION_FLOOR = 1e-13
#: relative accuracy the scalar API always honours before raising
REPORT_FLOOR = 1e-12
DEFAULT_TOL = 1e-14

ASYMPTOTIC_TERMS = 80
DOUBLE_TAYLOR_MAX_TERMS = 1200
EXTENDED_MAX_TERMS = 20000
#: highest Jordan-block size handled by :func:`eval_mlf_matrix`
DERIVATIVE_DEPTH = 8

_CHUNK = 2048


class Regime(str, enum.Enum):
    TAYLOR = "TaylorSeries"
    ASYMPTOTIC_UNSTABLE = "AsymptoticUnstable"
    ASYMPTOTIC_STABLE = "AsymptoticStable"


_REGIME_CODES = (Regime.TAYLOR, Regime.ASYMPTOTIC_UNSTABLE, Regime.ASYMPTOTIC_STABLE)


def check_parameters(alpha: float, beta: float) -> None:
    if not (math.isfinite(alpha) and 0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    if not (math.isfinite(beta) and beta > 0.0):
        raise DomainError(f"beta must be positive, got {beta!r}")


@dataclass(frozen=True)
class MLQuery:
    """An ``(alpha, beta, z)`` triple addressed to the evaluator."""

    alpha: float
    beta: float
    z: complex

    def __post_init__(self):
        check_parameters(self.alpha, self.beta)
        object.__setattr__(self, "z", complex(self.z))


@dataclass(frozen=True)
class MLResult:
    value: complex
    est_abs_error: float
    regime: Regime


# {{{ regime kernels


def _exp_term(alpha, beta, z):
    """(1/alpha) z^((1-beta)/alpha) exp(z^(1/alpha)) and z^(1/alpha), principal branch."""
    logz = np.log(z)
    w = np.exp(logz / alpha)
    with np.errstate(over="ignore", invalid="ignore"):
        x = np.exp((1.0 - beta) / alpha * logz + w) / alpha
    return x, w


def _exp_term_rounding(alpha, beta, z, w, xz):
    """Rounding budget for :func:`_exp_term`: errors in log z are amplified through exp(log z / alpha)."""
    logz = np.abs(np.log(z))
    gain = 4.0 + np.abs(w) * (2.0 + logz / alpha) + abs(1.0 - beta) / alpha * logz
    return EPS * gain * np.abs(xz)


def _asymptotic(alpha, beta, z, remainder):
    r = np.abs(z)
    th = np.abs(np.angle(z))
    k = np.arange(1, ASYMPTOTIC_TERMS + 1)
    x = beta - alpha * k
    coef = rgamma(x)
    # |1/Gamma(x)| <= Gamma(1 - x)/pi for x <= 0; used as a pole-free envelope
    env = np.where(x > 0, -gammaln(np.where(x > 0, x, 1.0)), gammaln(1.0 - x) - math.log(math.pi))
    log_env = env[None, :] - k[None, :] * np.log(r)[:, None]
    m = np.argmin(log_env, axis=1)  # index of the first omitted term
    keep = k[None, :] <= m[:, None]
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        terms = -coef[None, :] * np.exp(-k[None, :] * np.log(z)[:, None])
    terms = np.where(keep, terms, 0.0)
    value = terms.sum(axis=1)
    # optimal truncation near a Stokes line leaves ~sqrt(pi |z|^(1/alpha) / 2) times the first omitted term
    stokes = 1.0 + np.sqrt(0.5 * math.pi * r ** (1.0 / alpha))
    err = 2.0 * stokes * np.exp(log_env[np.arange(z.size), m]) + 4.0 * EPS * np.abs(terms).sum(axis=1)
    trunc_err = err.copy()

    if not remainder:
        with_exp = th < alpha * math.pi
        if np.any(with_exp):
            xz, w = _exp_term(alpha, beta, z[with_exp])
            value[with_exp] += xz
            err[with_exp] += _exp_term_rounding(alpha, beta, z[with_exp], w, xz)
    regime = np.where(th < alpha * math.pi / 2, 1, 2)
    return value, err, trunc_err, regime


def _taylor_terms_needed(alpha, beta, rmax):
    """Smallest term count whose tail bound is far below double precision."""
    if rmax == 0.0:
        return 1
    logr = math.log(rmax)
    k = np.arange(DOUBLE_TAYLOR_MAX_TERMS + 1)
    lt = k * logr - gammaln(alpha * k + beta)
    q = rmax * np.exp(gammaln(alpha * k + beta) - gammaln(alpha * k + alpha + beta))
    ok = (lt < max(lt.max(), 0.0) - 45.0) & (q < 0.5)
    idx = np.flatnonzero(ok)
    return int(idx[0]) if idx.size else None


def _taylor_double(alpha, beta, z, remainder):
    r = np.abs(z)
    n = _taylor_terms_needed(alpha, beta, float(r.max()))
    if n is None:
        inf = np.full(z.shape, np.inf)
        return np.zeros_like(z), inf
    k = np.arange(n)
    rg = rgamma(alpha * k + beta)
    powers = np.ones((z.size, n), dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        if n > 1:
            powers[:, 1:] = np.cumprod(np.broadcast_to(z[:, None], (z.size, n - 1)), axis=1)
        terms = powers * rg[None, :]
        value = terms.sum(axis=1)
        rounding = EPS * (np.abs(terms) * (k + 2.0)[None, :]).sum(axis=1)
    rounding = np.where(np.isfinite(rounding), rounding, np.inf)

    lq = gammaln(alpha * n + beta) - gammaln(alpha * n + alpha + beta)
    with np.errstate(divide="ignore"):
        q = r * math.exp(lq)
        lead = np.exp(n * np.log(r) - gammaln(alpha * n + beta))
    tail = np.where(q < 1.0, lead / np.maximum(1.0 - q, 1e-300), np.inf)
    err = tail + rounding

    if remainder:
        xz, w = _exp_term(alpha, beta, z)
        value = value - xz
        err = err + _exp_term_rounding(alpha, beta, z, w, xz)
    return value, err


@functools.lru_cache(maxsize=512)
def _rgamma_table(alpha: float, beta: float, n: int, bits: int) -> tuple:
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        a = gmpy2.mpfr(alpha)
        b = gmpy2.mpfr(beta)
        return tuple(1 / gmpy2.gamma(a * k + b) for k in range(n))


def _extended_plan(alpha, beta, r):
    """Term count and working precision (bits) for the extended series at |z| <= r.

    The radius is rounded up to a 1/16-octave bucket so plans can be cached.
    """
    return _extended_plan_bucket(float(alpha), float(beta), math.ceil(16.0 * math.log2(r)))


@functools.lru_cache(maxsize=4096)
def _extended_plan_bucket(alpha, beta, bucket):
    r = 2.0 ** (bucket / 16.0)
    logr = math.log(r)
    k = 0
    lmax = -math.inf
    while True:
        lt = k * logr - math.lgamma(alpha * k + beta)
        lmax = max(lmax, lt)
        bits = 96 + int(math.ceil(max(lmax, 0.0) / math.log(2)))
        if k > 2:
            q = r * math.exp(math.lgamma(alpha * k + beta) - math.lgamma(alpha * k + alpha + beta))
            if q < 0.5 and lt < lmax - bits * math.log(2) - 5.0:
                break
        k += 1
        if k > EXTENDED_MAX_TERMS:
            raise PrecisionError(
                f"extended Mittag-Leffler series needs more than {EXTENDED_MAX_TERMS} "
                f"terms at |z|={r:.6g}, alpha={alpha}"
            )
    n = 32 * ((k + 32) // 32)
    bits = 64 * ((bits + 63) // 64)
    return n, bits, lmax


def _extended_one(alpha, beta, z, remainder):
    r = abs(z)
    n, bits, lmax = _extended_plan(alpha, beta, r)
    table = _rgamma_table(float(alpha), float(beta), n, bits)
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        zz = gmpy2.mpc(z)
        s = gmpy2.mpc(0)
        for c in reversed(table):
            s = s * zz + c
        if remainder:
            lz = gmpy2.log(zz)
            a = gmpy2.mpfr(alpha)
            s = s - gmpy2.exp((1 - gmpy2.mpfr(beta)) / a * lz + gmpy2.exp(lz / a)) / a
        value = complex(s)
    err = EPS * abs(value) + math.exp(lmax - bits * math.log(2) + math.log(n) + 2.0)
    return value, err


# }}}


def _evaluate(alpha, beta, z, tol, remainder):
    check_parameters(alpha, beta)
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    value = np.zeros(z.shape, dtype=complex)
    err = np.full(z.shape, np.inf)
    regime = np.zeros(z.shape, dtype=np.int8)

    if remainder:
        bad = (z != 0) & (np.abs(np.angle(z)) >= alpha * math.pi)
        if np.any(bad):
            raise DomainError("the exponential splitting needs |arg z| < alpha*pi")

    if alpha == 1.0 and beta == 1.0:
        with np.errstate(over="ignore"):
            ez = np.exp(z)
        value = np.zeros_like(z) if remainder else ez
        err = np.zeros(z.shape) if remainder else EPS * (1.0 + np.abs(z)) * np.abs(ez)
        regime = np.where(np.abs(np.angle(z)) < math.pi / 2, 1, 2).astype(np.int8)
        return value.reshape(shape), err.reshape(shape), regime.reshape(shape)

    zero = z == 0
    if np.any(zero):
        v0 = float(rgamma(beta))
        if remainder:
            # for beta > 1 the split term has a pole at the origin
            v0 = v0 - (1.0 / alpha if beta == 1.0 else (0.0 if beta < 1.0 else np.nan))
        value[zero] = v0
        err[zero] = EPS * abs(v0) if np.isfinite(v0) else 0.0

    todo = np.flatnonzero(~zero)
    r = np.abs(z)
    scale = np.where(r > 0, r, 1.0) ** (1.0 / alpha)

    # 1. large-argument expansion
    cand = todo[scale[todo] >= 6.0]
    for chunk in np.array_split(cand, max(1, cand.size // _CHUNK + 1)):
        if chunk.size == 0:
            continue
        v, e, trunc, reg = _asymptotic(alpha, beta, z[chunk], remainder)
        target = np.maximum(tol, PRECISION_FLOOR * np.abs(v))
        ok = trunc <= target
        value[chunk[ok]] = v[ok]
        err[chunk[ok]] = e[ok]
        regime[chunk[ok]] = reg[ok]
    todo = todo[~np.isfinite(err[todo])]

    # 2. double-precision Taylor series
    cand = todo[scale[todo] <= 60.0]
    for chunk in np.array_split(cand, max(1, cand.size // _CHUNK + 1)):
        if chunk.size == 0:
            continue
        v, e = _taylor_double(alpha, beta, z[chunk], remainder)
        target = np.maximum(tol, PRECISION_FLOOR * np.abs(v))
        ok = e <= target
        value[chunk[ok]] = v[ok]
        err[chunk[ok]] = e[ok]
        regime[chunk[ok]] = 0
    todo = todo[~np.isfinite(err[todo])]

    # 3. extended-precision Taylor series
    for i in todo:
        value[i], err[i] = _extended_one(alpha, beta, complex(z[i]), remainder)
        regime[i] = 0

    return value.reshape(shape), err.reshape(shape), regime.reshape(shape)


def mittag_leffler(alpha, beta, z, tol=DEFAULT_TOL, *, with_error=False):
    """Vectorised :math:`E_{\\alpha,\\beta}(z)`.

    Returns an array shaped like ``z``; with ``with_error=True`` a pair
    ``(values, estimated_absolute_errors)``.
    """
    v, e, _ = _evaluate(alpha, beta, z, tol, remainder=False)
    return (v, e) if with_error else v


def ml_remainder(alpha, beta, z, tol=DEFAULT_TOL, *, with_error=False):
    """Vectorised :math:`E_{\\alpha,\\beta}(z) - \\frac{1}{\\alpha}z^{(1-\\beta)/\\alpha}e^{z^{1/\\alpha}}`.

    Defined for :math:`|\\arg z| < \\alpha\\pi`. For large :math:`|z|` this is the
    algebraic tail of the expansion, of size :math:`O(|z|^{-1})`, and is
    computed without subtracting two exponentially large numbers.
    """
    v, e, _ = _evaluate(alpha, beta, z, tol, remainder=True)
    return (v, e) if with_error else v


def eval_mlf(query: MLQuery, tol: float = DEFAULT_TOL) -> MLResult:
    """Evaluate :math:`E_{\\alpha,\\beta}(z)` for a single query.

    Raises :class:`PrecisionError` when the committed error bound exceeds both
    ``tol`` and the relative floor :data:`REPORT_FLOOR` (or the value overflows).
    """
    v, e, reg = _evaluate(query.alpha, query.beta, np.array([query.z]), tol, remainder=False)
    value, est = complex(v[0]), float(e[0])
    if not (np.isfinite(value.real) and np.isfinite(value.imag)):
        raise PrecisionError(f"E_{{{query.alpha},{query.beta}}}({query.z}) overflows double precision")
    if est > max(tol, REPORT_FLOOR * abs(value)):
        raise PrecisionError(f"cannot reach tol={tol:g} at z={query.z} (estimated error {est:.3g})")
    return MLResult(value, est, _REGIME_CODES[int(reg[0])])


# {{{ matrix arguments


def ml_taylor_coefficients(alpha, beta, lam, depth, tol=DEFAULT_TOL, radius=0.5, nodes=64):
    r"""Taylor coefficients :math:`E^{(k)}_{\alpha,\beta}(\lambda)/k!` for ``k < depth``.

    Computed by the trapezoidal rule on the circle :math:`|z - \lambda| = \rho`
    (Cauchy's integral formula), which converges geometrically for entire
    functions.
    """
    if depth > DERIVATIVE_DEPTH:
        raise DefectiveMatrixError(
            f"Jordan blocks larger than {DERIVATIVE_DEPTH} are not supported (got {depth})"
        )
    theta = 2 * np.pi * np.arange(nodes) / nodes
    pts = lam + radius * np.exp(1j * theta)
    vals = mittag_leffler(alpha, beta, pts, tol)
    out = np.empty(depth, dtype=complex)
    out[0] = mittag_leffler(alpha, beta, np.array([lam]), tol)[0]
    for k in range(1, depth):
        out[k] = np.mean(vals * np.exp(-1j * k * theta)) / radius**k
    return out


def eval_mlf_matrix(alpha, beta, M, tol=DEFAULT_TOL, jordan_blocks=None):
    """:math:`E_{\\alpha,\\beta}(M)` through the Jordan data of ``M``.

    Diagonalisable matrices go through their eigendecomposition. Matrices that
    are already in Jordan form, or whose block structure is supplied through
    ``jordan_blocks``, get the upper-triangular Toeplitz fill with the scalar
    function's Taylor coefficients on the super-diagonals.
    """
    from .spectral import jordan_decomposition

    check_parameters(alpha, beta)
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError("matrix argument must be square")
    jd = jordan_decomposition(M, jordan_blocks=jordan_blocks)
    F = np.zeros_like(M)
    for (lam, size), sl in zip(jd.blocks, jd.slices()):
        c = ml_taylor_coefficients(alpha, beta, lam, size, tol)
        for k in range(size):
            idx = np.arange(size - k)
            F[sl.start + idx, sl.start + idx + k] = c[k]
    return jd.T @ F @ jd.T_inv


# }}}
