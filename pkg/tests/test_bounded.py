import json
import math

import mpmath as mp
import numpy as np
import pytest
from scipy.special import gamma

from fracperron import _json
from fracperron.bounded import (
    BoundedSolutionSet,
    NotHyperbolic,
    bounded_set,
    certify_boundedness,
    decay_check,
    tail_cutoff,
    unstable_init_block,
    unstable_init_scalar,
    witness_forcing,
)
from fracperron.errors import MissingSupNormError, PreconditionError, SectorError
from fracperron.forcing import Constant, ExpDecay, PiecewiseLinearTable, Sinusoid, forcing_from_dict, linear_image
from fracperron.solver import scalar_path, solve_ivp, uniform_grid
from fracperron.spectral import SectorClass, exponential_rate

import oracles


# scalar unstable initial value


def test_constant_forcing_closed_form():
    assert unstable_init_scalar(1.0, 0.5, Constant(2.0)) == -2.0


def test_zero_forcing():
    assert unstable_init_scalar(1.0, 0.5, Constant(0.0)) == 0.0


def test_exponential_forcing_against_quadrature_oracle():
    ref = oracles.unstable_init_quad(2.0, 0.5, lambda s: mp.exp(-s))
    assert ref == pytest.approx(-0.4, abs=1e-8)
    assert unstable_init_scalar(2.0, 0.5, ExpDecay(1.0, 1.0)) == pytest.approx(-0.4, abs=1e-15)
    assert unstable_init_scalar(2.0, 0.5, ExpDecay(1.0, 1.0), method="quadrature") == pytest.approx(ref, abs=1e-12)


def test_complex_eigenvalue_against_quadrature_oracle():
    lam, alpha = 1.5 * np.exp(0.4j), 0.8
    f = Sinusoid(1.0, 1.2, 0.3, 0.5)
    ref = oracles.unstable_init_quad(lam, alpha, lambda s: 0.5 + mp.sin(1.2 * s + 0.3))
    assert unstable_init_scalar(lam, alpha, f) == pytest.approx(ref, abs=1e-12)
    assert unstable_init_scalar(lam, alpha, f, method="quadrature") == pytest.approx(ref, abs=1e-10)


def test_tail_cutoff_meets_bound():
    lam, alpha, sup, tol = 2.0, 0.5, 3.0, 1e-12
    T = tail_cutoff(lam, alpha, sup, tol)
    rho = exponential_rate(alpha, lam)
    assert sup * abs(lam) ** (1 / alpha - 1) * math.exp(-rho * T) / rho <= tol / 2 * (1 + 1e-12)


def test_scalar_errors():
    with pytest.raises(SectorError):
        unstable_init_scalar(-1.0, 0.5, Constant(1.0))
    with pytest.raises(SectorError):
        unstable_init_scalar(np.exp(1j * np.pi / 4), 0.5, Constant(1.0))
    with pytest.raises(MissingSupNormError):
        unstable_init_scalar(1.0, 0.5, PiecewiseLinearTable([0.0, 1.0], [0.0, 1.0]))
    with pytest.raises(PreconditionError):
        unstable_init_scalar(1.0, 0.5, PiecewiseLinearTable([0.0, 1.0], [0.0, 1.0], sup_norm=1.0, bounded=False))


def test_bounded_trajectory_stays_and_perturbation_escapes():
    t = uniform_grid(25.0, 2500)
    x0 = unstable_init_scalar(1.0, 0.5, Constant(2.0))
    kept = scalar_path(1.0, 0.5, Constant(2.0), x0, t).values
    assert np.max(np.abs(kept + 2.0)) < 1e-4
    off = scalar_path(1.0, 0.5, Constant(2.0), x0 + 1e-6, t).values
    assert np.max(np.abs(off)) > 1e3


# Jordan blocks


def test_block_of_size_one_is_scalar():
    f = ExpDecay(1.0, 1.0)
    np.testing.assert_allclose(unstable_init_block((2.0, 1), 0.5, [f]), [unstable_init_scalar(2.0, 0.5, f)])


def test_block_constant_cascade():
    y = unstable_init_block((1.0, 2), 0.5, [Constant(0.0), Constant(2.0)])
    np.testing.assert_allclose(y, [2.0, -2.0], atol=1e-9)


def test_block_zero_forcing():
    np.testing.assert_allclose(unstable_init_block((1.0, 2), 0.5, [Constant(0.0), Constant(0.0)]), [0.0, 0.0], atol=1e-14)


def test_block_bounded_member_approaches_steady_state():
    g = [Constant(1.0), ExpDecay(1.0, 0.5)]
    y = unstable_init_block((2.0, 2), 0.7, g)
    # solver error is amplified like exp(rho t) with rho ~ 2.7, so keep the horizon short
    tr = solve_ivp([[2.0, 1.0], [0.0, 2.0]], 0.7, g, y, uniform_grid(3.0, 4800), 1.0)
    assert np.max(tr.norms()) < 0.6
    assert tr.states[-1, 0].real == pytest.approx(-0.5, abs=0.01)


# bounded-solution sets


def test_saddle_set():
    b = bounded_set(np.diag([-1.0, 1.0]), 0.5, [Constant(1.0), Constant(2.0)])
    assert isinstance(b, BoundedSolutionSet)
    assert b.stable_dim == 1
    np.testing.assert_allclose(b.unstable_init, [-2.0], atol=1e-14)
    cert = certify_boundedness(b, samples=3, horizon=500.0)
    assert cert.passed


def test_zero_matrix_verdict():
    v = bounded_set(np.zeros((1, 1)), 0.5, [Constant(gamma(1.5))], witness=True)
    assert isinstance(v, NotHyperbolic)
    assert v.offending[0].sector is SectorClass.ZERO
    w = forcing_from_dict(v.witness["forcing"][0])
    assert w(np.array([3.0]))[0] == pytest.approx(gamma(1.5))
    # every solution grows like x0 + t^alpha
    tr = solve_ivp([[0.0]], 0.5, [w], [0.0], uniform_grid(100.0, 200))
    assert abs(tr.states[-1, 0]) == pytest.approx(10.0, rel=1e-12)


def test_boundary_verdict_witness():
    lam = np.exp(1j * 0.5 * np.pi / 2)
    v = bounded_set(np.array([[lam]]), 0.5, [Constant(1.0)], witness=True)
    assert isinstance(v, NotHyperbolic)
    assert v.witness["class"] == "BoundaryPlus"
    assert v.witness["scalar_forcing"]["family"] == "ComplexExponential"
    low = bounded_set(np.array([[np.conj(lam)]]), 0.5, [Constant(1.0)], witness=True)
    assert low.witness["scalar_forcing"]["params"]["direction"] == -1


def test_all_stable_set():
    b = bounded_set(np.diag([-1.0, -2.0]), 0.5, [Sinusoid(), Constant(1.0)])
    assert b.stable_dim == 2 and b.unstable_init.size == 0


def test_steady_state_law_all_unstable():
    A = np.array([[1.0, 0.3], [-0.2, 2.0]])
    c = np.array([1.0, -0.5])
    b = bounded_set(A, 0.6, [Constant(c[0]), Constant(c[1])])
    x = b.assemble()
    assert np.linalg.norm(A @ x + c) <= 1e-8


def test_perturbation_escapes_quickly():
    A = np.diag([-1.0, 1.0, 2.0])
    f = [Sinusoid(), Constant(1.0), ExpDecay(1.0, 1.0)]
    b = bounded_set(A, 0.5, f)
    rho_min = min(exponential_rate(0.5, 1.0), exponential_rate(0.5, 2.0))
    eps = 1e-6
    t_limit = (math.log(1e3) + 1.0) / rho_min
    t = uniform_grid(t_limit, 2000)
    base = b.assemble()
    for k in range(1, 3):
        x0 = base.copy()
        x0[k] += eps
        tr = solve_ivp(A, 0.5, f, x0, t, 1.0)
        ref = solve_ivp(A, 0.5, f, base, t, 1.0)
        assert np.max(np.linalg.norm(tr.states - ref.states, axis=1)) > 1e3 * eps


def test_scalar_set_agrees_with_scalar_routine():
    f = ExpDecay(1.0, 1.0)
    b = bounded_set([[2.0]], 0.5, [f])
    assert b.unstable_init[0] == unstable_init_scalar(2.0, 0.5, f)
    b = bounded_set([[-2.0]], 0.5, [f])
    assert b.stable_dim == 1


def test_transform_covariance():
    A = np.diag([-1.0, 1.0])
    f = [Sinusoid(1.0, 1.0), Constant(1.0)]
    P = np.array([[1.0, 0.5], [-0.3, 1.0]])
    b = bounded_set(A, 0.5, f)
    bp = bounded_set(P @ A @ np.linalg.inv(P), 0.5, linear_image(P, f))
    np.testing.assert_allclose(bp.assemble(), P @ b.assemble(), atol=1e-12)
    m = b.member(horizon=50.0)
    mp_ = bp.member(horizon=50.0)
    np.testing.assert_allclose(mp_.states, m.states @ P.T, atol=1e-8)


def test_set_json_round_trip():
    A = np.array([[-1.0, 0.5], [0.0, 1.0]])
    b = bounded_set(A, 0.5, [Sinusoid(1.0, 2.0), ExpDecay(1.0, 1.0)])
    b.certification = {"boundedness": certify_boundedness(b, samples=2, horizon=50.0).to_dict()}
    back = BoundedSolutionSet.from_dict(json.loads(_json.dumps(b.to_dict())))
    assert back == b


def test_not_hyperbolic_round_trip():
    v = bounded_set(np.zeros((2, 2)), 0.5, [Constant(1.0), Constant(1.0)], witness=True)
    assert NotHyperbolic.from_dict(json.loads(_json.dumps(v.to_dict()))) == v


def test_witness_forcing_refuses_hyperbolic():
    b = bounded_set(np.diag([-1.0, 1.0]), 0.5, [Constant(1.0), Constant(1.0)])
    with pytest.raises(ValueError):
        witness_forcing(b.report)


# decay


def test_decay_requires_decaying_forcing():
    b = bounded_set(np.diag([-1.0, 1.0]), 0.5, [Constant(1.0), Constant(1.0)])
    with pytest.raises(PreconditionError):
        decay_check(b)


def test_decay_saddle_exponential_forcing():
    b = bounded_set(np.diag([-1.0, 1.0]), 0.5, [ExpDecay(1.0, 1.0), ExpDecay(1.0, 1.0)])
    cert = decay_check(b, horizon=300.0)
    assert cert.envelope_monotone
    assert cert.passed, f"final norms {cert.final_norms} against threshold {cert.threshold}"


def test_decay_stable_only_zero_forcing():
    b = bounded_set(np.diag([-1.0, -2.0]), 0.5, [Constant(0.0), Constant(0.0)])
    cert = decay_check(b, horizon=300.0)
    assert cert.envelope_monotone
    assert cert.passed, f"final norms {cert.final_norms} against threshold {cert.threshold}"


def test_decay_envelope_is_algebraic():
    # the slow part of every member is a multiple of t^-alpha / Gamma(1 - alpha)
    b = bounded_set(np.diag([-1.0, 1.0]), 0.5, [ExpDecay(1.0, 1.0), ExpDecay(1.0, 1.0)])
    m = b.member(horizon=300.0)
    xbar = abs(b.unstable_init[0])
    assert m.norms()[-1] == pytest.approx(xbar * 300.0**-0.5 / gamma(0.5), rel=0.05)
