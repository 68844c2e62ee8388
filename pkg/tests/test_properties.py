import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lrmoments.linops import projections, truncated_psd_pinv, truncated_svd_pinv
from lrmoments.score_test import make_folds, score_statistic
from oracles import penrose_residuals

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite))
def test_svd_pinv_penrose(a):
    x, rank = truncated_svd_pinv(a, 0.0)
    scale = max(1.0, float(np.abs(a).max()))
    assert rank <= min(a.shape)
    assert max(penrose_residuals(a, x)) <= 1e-8 * scale**2 * max(1.0, float(np.abs(x).max()))


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=finite),
    st.floats(0, 5),
)
def test_psd_pinv_rank_counts_large_eigenvalues(b, nu):
    m = b @ b.T
    r = truncated_psd_pinv(m, nu)
    eig = np.linalg.eigvalsh((m + m.T) / 2)
    assert r.rank == int(np.sum(eig > nu)) or np.any(np.isclose(eig, nu, rtol=1e-9, atol=1e-12))
    np.testing.assert_allclose(r.pinv, r.pinv.T, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 6), st.integers(1, 2), st.integers(0, 2**31))
def test_projection_identities(T, q, seed):
    V = np.random.default_rng(seed).normal(size=(T, q))
    P = projections(V)
    np.testing.assert_allclose(P.Q @ V, 0.0, atol=1e-10)
    np.testing.assert_allclose(P.H @ V, np.eye(q), atol=1e-10)
    np.testing.assert_allclose(P.Q @ P.Q, P.Q, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 300), st.integers(1, 10), st.integers(0, 1000))
def test_folds_partition(n, L, seed):
    if L > n:
        return
    f = make_folds(n, L, seed)
    sizes = f.sizes()
    assert sizes.sum() == n
    assert sizes.max() - sizes.min() <= 1


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 5), st.integers(2, 1000))
def test_scalar_statistic_nonnegative_and_monotone_in_n(g, w, n):
    a = score_statistic([g], [[w]], n, nu=0.0)
    b = score_statistic([g], [[w]], 2 * n, nu=0.0)
    assert a.statistic >= 0.0
    assert b.statistic >= a.statistic
