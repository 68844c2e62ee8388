import numpy as np
import pytest

from lrmoments import kotlarski as ko
from lrmoments.linops import InputError
from lrmoments.rng import generator

import kotlarski_oracle as kor


def test_conditional_identity():
    assert kor.identity_error() <= 1e-8


def test_population_moments_match_closed_form():
    dm = kor.population_moments()
    m1 = kor.ALPHA_PROB @ kor.ALPHA
    m2 = kor.ALPHA_PROB @ kor.ALPHA**2
    assert dm.EY1[1] == pytest.approx(m1, abs=1e-13)
    assert dm.EY1[2] == pytest.approx(m2 + kor.SIGMA1**2, abs=1e-12)
    assert dm.EY2Y1[1] == pytest.approx(kor.BETA0 * m2, abs=1e-12)


def test_first_order_coefficient():
    # g_1 = beta0 psi_1 - Y2 - gamma_10 (Y2 - beta0 Y1) with gamma_10 = -psi_1 / E[Y1]
    coeffs = kor.population_coefficients(1)
    dm = coeffs.data_moments
    assert coeffs.gamma[0][0] == pytest.approx(-coeffs.psi[0] / dm.EY1[1], rel=1e-12)


def _mean_g(k, coeffs, beta0, psi):
    shifted = ko.KotlarskiCoefficients(
        coeffs.K, beta0, coeffs.c, coeffs.b, coeffs.gamma, coeffs.data_moments, np.asarray(psi)
    )
    return kor.population_mean(lambda y1, y2: ko.eval_g(k, y1, y2, shifted))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_orthogonal_in_beta_and_lower_moments(k):
    coeffs = kor.population_coefficients()
    psi = kor.psi_true()
    h = 1.0  # g is affine in each argument, so the central difference is exact
    d_beta = (_mean_g(k, coeffs, kor.BETA0 + h, psi) - _mean_g(k, coeffs, kor.BETA0 - h, psi)) / (2 * h)
    assert abs(d_beta) <= 1e-9
    for j in range(1, k):
        up, down = psi.copy(), psi.copy()
        up[j - 1] += h
        down[j - 1] -= h
        d = (_mean_g(k, coeffs, kor.BETA0, up) - _mean_g(k, coeffs, kor.BETA0, down)) / (2 * h)
        assert abs(d) <= 1e-9, j
    assert _mean_g(k, coeffs, kor.BETA0, psi) == pytest.approx(0.0, abs=1e-10)


def test_plain_moment_is_not_orthogonal():
    coeffs = kor.population_coefficients()
    psi = kor.psi_true()
    up = kor.population_mean(lambda a, b: ko.eval_a(2, a, b, kor.BETA0 + 1, psi))
    down = kor.population_mean(lambda a, b: ko.eval_a(2, a, b, kor.BETA0 - 1, psi))
    assert abs(up - down) / 2 > 1e-2


def test_estimator_recovers_moments_on_large_sample():
    rng = generator(3)
    n = 200_000
    alpha = rng.choice(kor.ALPHA, size=n, p=kor.ALPHA_PROB)
    y1 = alpha + kor.SIGMA1 * rng.standard_normal(n)
    y2 = kor.BETA0 * alpha + kor.SIGMA2 * rng.standard_normal(n)
    est = ko.estimate_moments(ko.KotlarskiSample(y1, y2), kor.BETA0, 4)
    se = est.standard_errors()
    assert np.all(np.abs(est.psi_hat - kor.psi_true()) <= 4 * se)
    np.testing.assert_allclose(est.moments.mean(axis=0), 0.0, atol=1e-8)


def test_zero_mean_y1_is_not_identified():
    dm = ko.DataMoments(np.array([1.0, 0.0, 1.0]), np.array([0.0, 1.0]))
    with pytest.raises(ko.IdentificationError):
        ko.coefficients(2, 1.0, dm, [0.0, 1.0])


def test_sample_validation():
    with pytest.raises(InputError):
        ko.KotlarskiSample([1.0, 2.0], [1.0])
    with pytest.raises(InputError):
        ko.KotlarskiSample([1.0, np.nan], [1.0, 2.0])


def test_first_moment_equals_mean_y1_when_ratio_holds():
    rng = generator(11)
    y1 = rng.normal(1.0, 1.0, 500)
    y2 = rng.normal(size=500)
    y2 = y2 - y2.mean() + 2.0 * y1.mean()
    est = ko.estimate_moments(ko.KotlarskiSample(y1, y2), 2.0, 1)
    assert est.psi_hat[0] == pytest.approx(y1.mean(), rel=1e-12)


def test_degenerate_sample_is_exact():
    a, beta0 = 1.3, 0.8
    sample = ko.KotlarskiSample(np.full(10, a), np.full(10, beta0 * a))
    est = ko.estimate_moments(sample, beta0, 4)
    np.testing.assert_allclose(est.psi_hat, [a, a**2, a**3, a**4], rtol=1e-10)


def test_second_moment_on_simulation_design():
    from lrmoments.mc.dgp import eta_grid, sample_dgp

    eta = eta_grid()
    s = sample_dgp(100_000, 1.0, eta, 21)
    est = ko.estimate_moments(s, 1.0, 2)
    target = float(eta.masses @ eta.grid**2)
    assert abs(est.psi_hat[1] - target) <= 3 * est.standard_errors()[1]
    assert target == pytest.approx(1.0, abs=0.01)


def test_recursion_is_lower_triangular():
    dm = kor.population_moments()
    psi = kor.psi_true()
    changed = psi.copy()
    changed[3] += 5.0
    a = ko.coefficients(4, kor.BETA0, dm, psi)
    b = ko.coefficients(4, kor.BETA0, dm, changed)
    for k in range(3):
        np.testing.assert_array_equal(a.gamma[k], b.gamma[k])


def test_opposite_gamma0_sign_is_not_orthogonal():
    coeffs = kor.population_coefficients(1)
    psi = kor.psi_true(1)
    flipped = ko.KotlarskiCoefficients(
        1, kor.BETA0, coeffs.c, coeffs.b, (-coeffs.gamma[0],), coeffs.data_moments, psi
    )

    def mean_g(beta):
        c = ko.KotlarskiCoefficients(1, beta, flipped.c, flipped.b, flipped.gamma, flipped.data_moments, psi)
        return kor.population_mean(lambda y1, y2: ko.eval_g(1, y1, y2, c))

    assert (mean_g(kor.BETA0 + 1) - mean_g(kor.BETA0 - 1)) / 2 == pytest.approx(2 * psi[0], abs=1e-10)
