import itertools
import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal, norm

from cgshrink.errors import ConfigError, ConsistencyError, DimensionError
from cgshrink.linalg import SparseMatrix
from cgshrink.oracles import best_subset_brute, ridge_fit, score_statistic, spike_slab_enumerate


# -- ridge ---------------------------------------------------------------

def test_ridge_identity_design_shrinks_by_one_plus_penalty():
    y = np.array([2.0, -4.0, 6.0])
    np.testing.assert_allclose(ridge_fit(np.eye(3), y, 1.0), y / 2, rtol=1e-15)
    np.testing.assert_allclose(ridge_fit(np.eye(3), y, [1.0, 3.0, 0.5]), y / [2, 4, 1.5], rtol=1e-15)


def test_ridge_tiny_penalty_recovers_least_squares(rng):
    X = rng.standard_normal((40, 5))
    y = rng.standard_normal(40)
    ols, *_ = np.linalg.lstsq(X, y, rcond=None)
    np.testing.assert_allclose(ridge_fit(X, y, 1e-12), ols, rtol=1e-8)


def test_ridge_normal_equations(rng):
    X = rng.standard_normal((20, 30))
    y = rng.standard_normal(20)
    pen = rng.uniform(0.1, 2.0, 30)
    b = ridge_fit(X, y, pen)
    np.testing.assert_allclose(X.T @ (X @ b - y) + pen * b, 0, atol=1e-10)


def test_ridge_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        ridge_fit(np.eye(2), np.ones(2), 0.0)
    with pytest.raises(DimensionError):
        ridge_fit(np.eye(2), np.ones(3), 1.0)


# -- best subset ---------------------------------------------------------

def test_best_subset_orthonormal_design_keeps_largest_projections():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((10, 6)))
    z = np.array([0.5, -3.0, 1.0, 2.5, -0.1, 4.0])
    y = q @ z
    res = best_subset_brute(q, y, 3)
    assert res.support == (1, 3, 5)
    np.testing.assert_allclose(res.coef, [0, -3.0, 0, 2.5, 0, 4.0], atol=1e-12)
    assert res.rss == pytest.approx(0.5 ** 2 + 1 + 0.01, rel=1e-10)


def test_best_subset_full_budget_is_least_squares(rng):
    X = rng.standard_normal((30, 6))
    y = rng.standard_normal(30)
    res = best_subset_brute(X, y, 6)
    ols, *_ = np.linalg.lstsq(X, y, rcond=None)
    np.testing.assert_allclose(res.coef, ols, rtol=1e-10)
    assert res.n_evaluated == 2 ** 6


def test_best_subset_zero_budget():
    res = best_subset_brute(np.eye(3), np.array([1.0, 2.0, 2.0]), 0)
    assert res.support == () and res.rss == 9.0 and not res.coef.any()


def test_best_subset_tie_goes_to_first_support():
    X = np.column_stack([np.ones(4), np.ones(4)])
    assert best_subset_brute(X, np.ones(4), 1).support == (0,)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_best_subset_rss_monotone_and_exhaustive(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, 5))
    y = rng.standard_normal(12)
    rss = [best_subset_brute(X, y, k).rss for k in range(6)]
    assert all(a >= b - 1e-10 for a, b in zip(rss, rss[1:]))
    k = 2
    brute = min(np.sum((y - X[:, list(s)] @ np.linalg.lstsq(X[:, list(s)], y, rcond=None)[0]) ** 2)
                for s in itertools.combinations(range(5), k))
    assert rss[k] == pytest.approx(min(brute, rss[1]), rel=1e-10)


def test_best_subset_refuses_large_problems():
    X = np.zeros((5, 21))
    with pytest.raises(ConfigError, match="NP-hard"):
        best_subset_brute(X, np.zeros(5), 2)
    assert best_subset_brute(X, np.ones(5), 1, allow_large=True).n_evaluated == 22
    with pytest.raises(ConfigError):
        best_subset_brute(np.eye(3), np.ones(3), 4)


# -- spike and slab ------------------------------------------------------

def test_spike_slab_single_predictor_matches_hand_computation():
    X = np.array([[1.0], [2.0], [-1.0]])
    y = np.array([0.5, 1.5, -0.2])
    res = spike_slab_enumerate(X, y, inclusion_prob=0.3, slab_scale=2.0, sigma2=0.5)
    ev0 = multivariate_normal(np.zeros(3), 0.5 * np.eye(3)).logpdf(y)
    ev1 = multivariate_normal(np.zeros(3), 0.5 * np.eye(3) + 4.0 * X @ X.T).logpdf(y)
    w0, w1 = 0.7 * np.exp(ev0), 0.3 * np.exp(ev1)
    np.testing.assert_allclose(res.probabilities, [w0 / (w0 + w1), w1 / (w0 + w1)], rtol=1e-10)
    np.testing.assert_allclose(res.log_marginal, [ev0 + np.log(0.7), ev1 + np.log(0.3)], rtol=1e-12)


def test_spike_slab_evidence_matches_dense_gaussian(rng):
    X = rng.standard_normal((8, 3))
    y = rng.standard_normal(8)
    res = spike_slab_enumerate(X, y, 0.5, 1.5, 0.8)
    for i, cfg in enumerate(res.configs):
        xs = X[:, cfg.astype(bool)]
        cov = 0.8 * np.eye(8) + 1.5 ** 2 * xs @ xs.T
        want = multivariate_normal(np.zeros(8), cov).logpdf(y) + 3 * np.log(0.5)
        assert res.log_marginal[i] == pytest.approx(want, rel=1e-12)


def test_spike_slab_zero_design_returns_prior():
    res = spike_slab_enumerate(np.zeros((5, 3)), np.ones(5), inclusion_prob=0.2)
    sizes = res.configs.sum(axis=1)
    np.testing.assert_allclose(res.probabilities, 0.2 ** sizes * 0.8 ** (3 - sizes), rtol=1e-12)
    np.testing.assert_allclose(res.inclusion_probabilities(), 0.2, rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6), st.floats(0.05, 0.95))
def test_spike_slab_probabilities_normalised(seed, p, pi):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((10, p))
    y = 3 * rng.standard_normal(10)
    res = spike_slab_enumerate(X, y, pi)
    assert res.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(res.probabilities >= 0)
    assert res.n_local_modes >= 1
    assert int(np.argmax(res.probabilities)) in res.local_modes


def test_spike_slab_bimodal_collinear_pair():
    rng = np.random.default_rng(11)
    z = rng.standard_normal(50)
    X = np.column_stack([z + 0.01 * rng.standard_normal(50), z + 0.01 * rng.standard_normal(50),
                         rng.standard_normal(50)])
    y = 2 * z + rng.standard_normal(50)
    res = spike_slab_enumerate(X, y, inclusion_prob=0.2, slab_scale=3.0)
    modes = sorted(tuple(res.configs[i].astype(int)) for i in res.local_modes)
    assert modes == [(0, 1, 0), (1, 0, 0)]
    d = res.to_dict()
    assert d["n_local_modes"] == 2 and d["n_configs"] == 8
    json.dumps(d)


def test_spike_slab_guards():
    with pytest.raises(ConfigError, match="P <= 15"):
        spike_slab_enumerate(np.zeros((3, 16)), np.zeros(3))
    for kw in [dict(inclusion_prob=0.0), dict(inclusion_prob=1.0), dict(slab_scale=0.0),
               dict(sigma2=-1.0)]:
        with pytest.raises(ConfigError):
            spike_slab_enumerate(np.eye(2), np.ones(2), **kw)


# -- score statistic -----------------------------------------------------

def test_score_identity_information_is_squared_norm():
    u = np.array([1.0, -2.0, 2.0])
    res = score_statistic(np.eye(3), u)
    assert res.statistic == pytest.approx(9.0, rel=1e-14)
    assert res.cg_iterations == 1


def test_score_zero_vector():
    res = score_statistic(np.diag([1.0, 2.0]), np.zeros(2))
    assert res.statistic == 0.0 and res.cg_iterations == 0


def test_score_diagonal_information():
    d = np.array([0.5, 2.0, 10.0, 4.0])
    u = np.array([1.0, 1.0, -3.0, 0.5])
    assert score_statistic(np.diag(d), u).statistic == pytest.approx(np.sum(u ** 2 / d), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_score_invariant_under_rotation(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((6, 6))
    info = a @ a.T + 0.5 * np.eye(6)
    u = rng.standard_normal(6)
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    s1 = score_statistic(info, u).statistic
    s2 = score_statistic(q @ info @ q.T, q @ u).statistic
    assert s2 == pytest.approx(s1, rel=1e-8)


def test_score_chi_square_null_calibration():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((4, 4))
    info = a @ a.T + np.eye(4)
    l = np.linalg.cholesky(info)
    stats = np.array([score_statistic(info, l @ rng.standard_normal(4)).statistic for _ in range(2000)])
    assert abs(stats.mean() - 4) <= 5 * np.sqrt(8 / 2000)


def test_score_sparse_information_large_p():
    rng = np.random.default_rng(4)
    p = 200
    m = sp.random(p, p, density=0.02, random_state=5, format="csr")
    info = (m @ m.T + sp.identity(p)).tocsr()
    u = rng.standard_normal(p)
    res = score_statistic(SparseMatrix.from_scipy(info), u)
    want = u @ np.linalg.solve(info.toarray(), u)
    assert res.statistic == pytest.approx(want, rel=1e-9)
    assert res.relative_gap <= 1e-8
    assert res.condition_estimate == pytest.approx(np.linalg.cond(info.toarray()), rel=0.05)


def test_score_disagreement_raises():
    # condition ~1e14 drives the CG route away from the Cholesky one
    d = np.logspace(0, 14, 30)
    q, _ = np.linalg.qr(np.random.default_rng(6).standard_normal((30, 30)))
    info = (q * d) @ q.T
    info = 0.5 * (info + info.T)
    with pytest.raises(ConsistencyError, match="disagree"):
        score_statistic(info, np.random.default_rng(7).standard_normal(30))


def test_score_dimension_mismatch():
    with pytest.raises(DimensionError):
        score_statistic(np.eye(3), np.ones(2))
