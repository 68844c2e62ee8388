import numpy as np
import pytest

from lrmoments import panel_moments as pm
from lrmoments.linops import InputError
from lrmoments.synthetic import natality_like, truth

import discrete_panel
import orthogonality as orth


@pytest.fixture(scope="module")
def pop():
    return discrete_panel.build()


@pytest.fixture(scope="module")
def report(pop):
    return orth.orthogonality_report(pop)


def test_population_is_small(pop):
    assert pop.size <= 10_000
    assert pop.prob.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("name", ["beta", "alpha", "variance"])
def test_mean_zero_at_truth(report, name):
    assert report[name]["mean"] <= 1e-10


@pytest.mark.parametrize("name", ["beta", "alpha", "variance"])
def test_nuisance_derivatives_vanish(report, name):
    for field, value in report[name]["derivatives"].items():
        assert value <= 1e-10, field


def test_chamberlain_moment_is_not_orthogonal(report):
    assert report["chamberlain_beta_derivative"] > 1e-2


def test_omega_recovers_error_variance(report):
    np.testing.assert_allclose(report["variance"]["nuisance"].omega, [discrete_panel.SIGMA2], atol=1e-12)


def test_flipped_gamma_sign_breaks_orthogonality(pop):
    target = orth.default_targets(pop)["alpha"]
    nuis = orth.population_nuisance(pop, target)
    flipped = pm.with_nuisance(nuis, Gamma=-nuis.Gamma)
    psi0 = orth.population_truth(pop, target)
    d = orth.directional_derivatives(pop, flipped, target, psi0, "beta")
    assert np.max(np.abs(d)) > 1e-2


def test_s2_matrices():
    np.testing.assert_array_equal(pm.s2_iid(2).ravel(), [1, 0, 0, 1])
    s2 = pm.s2_nonstationary(3)
    assert s2.shape == (9, 2)
    np.testing.assert_array_equal(s2[:, 1].reshape(3, 3, order="F"), np.diag([0, 1, 2]))


def test_target_validation():
    with pytest.raises(InputError):
        pm.BetaCombination(np.zeros((3, 1)))
    with pytest.raises(InputError):
        pm.AlphaQuadratic(np.array([[1.0, 2.0], [0.0, 1.0]]), pm.s2_iid(2))
    assert pm.AlphaMean(np.zeros(2)).k == 1


def test_dataset_validation():
    with pytest.raises(InputError):
        pm.PanelDataset(np.zeros((2, 3)), np.zeros((2, 2, 1)), np.ones((2, 3, 1)))
    with pytest.raises(InputError):
        pm.PanelDataset(np.full((2, 2), np.nan), np.zeros((2, 2, 1)), np.ones((2, 2, 1)))


def test_order_condition_flags_short_units():
    V = np.ones((2, 2, 2))
    V[0, :, 1] = [0.0, 1.0]
    data = pm.PanelDataset(np.zeros((2, 2)), np.zeros((2, 2, 1)), V)
    np.testing.assert_array_equal(data.order_condition_violations(), [0])


def test_support_violation_when_slope_constant():
    V = np.ones((2, 3, 2))
    V[0, :, 1] = [0.0, 1.0, 2.0]
    data = pm.PanelDataset(np.zeros((2, 3)), np.zeros((2, 3, 1)), V)
    bad = pm.alpha_support_violations(data, pm.AlphaMean(np.array([0.0, 1.0])))
    np.testing.assert_array_equal(bad, [1])


def test_noiseless_beta_target_is_exact():
    # Y = W beta + V alpha exactly: the debiased estimate reproduces C1'beta
    rng = np.random.default_rng(4)
    n, T, p = 60, 4, 3
    W = rng.normal(size=(n, T, p))
    V = np.stack([np.ones((n, T)), rng.normal(size=(n, T))], axis=2)
    beta = np.array([0.5, -1.0, 0.25])
    Y = np.einsum("itp,p->it", W, beta) + np.einsum("itq,iq->it", V, rng.normal(size=(n, 2)))
    data = pm.PanelDataset(Y, W, V)

    class OneFold:
        L = 1
        assignment = np.zeros(n, dtype=int)

    target = pm.BetaCombination(np.array([0.0, 1.0, 0.0]))
    psi, _, per_obs = pm.plugin_psi(data, OneFold, target, nu_M=0.0)
    assert psi[0] == pytest.approx(-1.0, abs=1e-10)
    assert abs(per_obs.mean()) <= 1e-10


def test_plugin_estimates_near_truth_on_large_synthetic():
    from lrmoments.score_test import make_folds

    data = natality_like(n=2000, seed=5)
    folds = make_folds(data.n, 2, seed=0)
    tr = truth(data.p)
    psi, _, _ = pm.plugin_psi(data, folds, pm.AlphaMean(np.array([0.0, 1.0])))
    assert psi[0] == pytest.approx(tr.alpha_mean[1], abs=0.03)
    psi_b, _, _ = pm.plugin_psi(data, folds, pm.BetaCombination(np.eye(data.p)[:, 0]))
    assert psi_b[0] == pytest.approx(tr.beta[0], abs=0.03)
