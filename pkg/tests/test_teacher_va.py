import math

import numpy as np
import pytest

from lrmoments import teacher_va as tv
from lrmoments.linops import InputError
from lrmoments.rng import generator
from oracles import gauss_hermite_std

X64, W64 = gauss_hermite_std(64)


def test_low_order_values():
    assert tv.hermite(2, 2.0) == 3.0
    assert tv.hermite(3, 1.0) == -2.0
    assert tv.hermite(0, 7.0) == 1.0


def test_hermite_orthogonality():
    H = tv.hermite_all(10, X64)
    gram = (H * W64) @ H.T
    fact = np.array([math.factorial(k) for k in range(11)], dtype=float)
    assert np.max(np.abs(gram - np.diag(fact))) <= 1e-8


def test_hermite_stable_at_high_order():
    # compare with numpy's hermite_e evaluation at moderate arguments
    x = np.linspace(-20, 20, 41)
    for j in (30, 60):
        ref = np.polynomial.hermite_e.hermeval(x, np.eye(j + 1)[j])
        np.testing.assert_allclose(tv.hermite(j, x), ref, rtol=1e-9)


@pytest.mark.parametrize("theta", [0.3, 1.0, 2.5])
def test_convolution_identity(theta):
    for alpha in np.linspace(-3, 3, 13):
        y = alpha + theta * X64
        for k in range(7):
            assert abs(W64 @ tv.moment_basis(k, y, theta) - alpha**k) <= 1e-8


def test_moment_basis_closed_forms():
    y = np.array([-1.0, 0.5, 2.0])
    np.testing.assert_allclose(tv.moment_basis(0, y, 0.7), 1.0)
    np.testing.assert_allclose(tv.moment_basis(2, y, 0.7), y**2 - 0.49, atol=1e-15)
    with pytest.raises(InputError):
        tv.moment_basis(2, y, 0.0)


def test_simple_functionals():
    y = np.array([0.1, -2.0, 3.0])
    np.testing.assert_allclose(tv.analytic_moment(tv.monomial(1), y, 0.8).value, y)
    np.testing.assert_allclose(tv.analytic_moment(tv.monomial(2), y, 0.8).value, y**2 - 0.64, atol=1e-14)


@pytest.mark.parametrize("alpha", [-1.5, 0.0, 0.7, 2.0])
def test_exp_functional_at_J30(alpha):
    theta, t0 = 0.8, 0.5
    f = tv.exp_functional(t0, J=30)
    mv = tv.analytic_moment(f, alpha + theta * X64, theta)
    assert mv.J == 30
    assert abs(W64 @ mv.value - math.exp(alpha * t0)) <= 1e-6


def test_adaptive_J_is_capped_and_small_for_fast_decay():
    f = tv.exp_functional(0.5)
    J = tv.choose_J(f, y_max=3.0, theta=0.5)
    assert 0 < J < tv.J_MAX


def test_divergent_sequence_is_rejected():
    f = tv.AnalyticFunctional(lambda j: 10.0**j)
    with pytest.raises(tv.AdmissibilityError, match="diverges"):
        tv.analytic_moment(f, np.array([0.1]), 1.0)


def test_linear_functional_needs_no_correction():
    y = generator(1).normal(size=50)
    om = tv.orthogonalize(tv.monomial(1), tv.variance_auxiliary(0.0, 1.0), y, 0.5, psi0=0.2)
    assert om.Gamma0 == 0.0
    np.testing.assert_allclose(om(y), y - 0.2)


def test_cubic_gamma_is_three_ybar():
    y = generator(2).normal(loc=0.3, size=500)
    om = tv.orthogonalize(tv.monomial(3), tv.variance_auxiliary(0.3, 1.0), y, 0.6, psi0=0.0)
    assert om.Gamma0 == pytest.approx(3 * y.mean(), rel=1e-12)


def _sample(n=4000, theta=0.6, seed=5):
    rng = generator(seed)
    alpha = rng.normal(0.4, 0.5, size=n)
    return alpha + theta * rng.standard_normal(n)


@pytest.mark.parametrize("functional", [tv.monomial(3), tv.exp_functional(0.5)])
def test_derivative_matches_finite_difference(functional):
    y = _sample()
    theta, h = 0.6, 1e-5
    J = tv.analytic_moment(functional, y, theta).J
    fd = (tv._series(functional, y, theta + h, J).mean() - tv._series(functional, y, theta - h, J).mean()) / (2 * h)
    assert abs(fd - tv.moment_derivative(functional, y, theta, J).mean()) <= 1e-6


@pytest.mark.parametrize("functional", [tv.monomial(4), tv.exp_functional(0.5)])
def test_orthogonalized_moment_flat_in_theta(functional):
    y = _sample()
    aux = tv.variance_auxiliary(0.4, 0.25)
    om = tv.orthogonalize(functional, aux, y, 0.6, psi0=1.0)
    h = 1e-5
    d = (om(y, 0.6 + h).mean() - om(y, 0.6 - h).mean()) / (2 * h)
    assert abs(d) <= 1e-6


def test_plugin_psi_gives_mean_zero_under_aux_model():
    y = _sample(n=200_000, seed=9)
    f = tv.exp_functional(0.5)
    aux = tv.variance_auxiliary(0.4, 0.25)
    g0 = tv.analytic_moment(f, y, 0.6).value
    om = tv.orthogonalize(f, aux, y, 0.6, psi0=float(g0.mean()))
    assert om(y).mean() == pytest.approx(-om.Gamma0 * aux.g1(y, 0.6).mean(), abs=1e-12)
    assert abs(om(y).mean()) < 0.01
    # the target itself: E[exp(0.5 alpha)] for alpha ~ N(0.4, 0.25)
    assert g0.mean() == pytest.approx(math.exp(0.2 + 0.125 * 0.25), abs=0.02)


def test_zero_derivative_aux_is_irrelevant():
    aux = tv.AuxiliaryMoment(g1=lambda y, t: y, dg1=lambda y, t: np.zeros_like(y))
    with pytest.raises(tv.RelevanceError):
        tv.orthogonalize(tv.monomial(2), aux, np.ones(5), 1.0, 0.0)


def test_tail_diagnostic():
    assert tv.tail_diagnostic(np.array([0.0, 1.0]), 1.0, 0.5) == 0.0
    assert tv.tail_diagnostic(np.array([0.0, 1e3]), 0.01, 0.5) == 0.5
