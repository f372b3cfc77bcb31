import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rfridge.errors import DegenerateDistributionError, DomainError
from rfridge.feature_maps import FeatureMapSpec, feature_matrix, kernel_matrix, psi_matrix, sample_features
from rfridge.ridge_solvers import Dataset
from rfridge.seeding import rng_for
from rfridge.spectral import (
    eigen_scorer,
    empirical_effective_dimension,
    leverage_resample,
    leverage_scores,
    monte_carlo_effective_dimension,
    spectral_report,
    spline_effective_dimension,
)


def _uniform_data(n, seed=0):
    return Dataset(rng_for(seed, "unif").random(n), np.zeros(n))


@pytest.mark.parametrize("q, lam", [(4.0, 1e-3), (8.0, 1e-2), (2.0, 1e-4)])
def test_truncated_eigen_scores_within_tolerance(q, lam):
    spec = FeatureMapSpec.spline(q=q)
    data = _uniform_data(400, seed=3)
    pool = sample_features(spec, 300, 8).omegas
    K = kernel_matrix(spec, data.X)
    exact = leverage_scores(pool, data, spec, lam, K=K)
    for rtol in (1e-6, 1e-3):
        approx = leverage_scores(pool, data, spec, lam, scorer=eigen_scorer(K, lam, rtol=rtol))
        assert np.max(np.abs(approx - exact) / exact) <= rtol


def test_identity_gram():
    lam = 0.1
    assert empirical_effective_dimension(np.eye(5), lam) == pytest.approx(5 / (1 + 5 * lam))


def test_large_lambda_vanishes():
    K = kernel_matrix(FeatureMapSpec.rff(), rng_for(0, "x").random((20, 1)))
    assert empirical_effective_dimension(K, 1e8) < 1e-6


def test_asymmetric_gram_rejected():
    with pytest.raises(DomainError):
        empirical_effective_dimension(np.array([[1.0, 0.5], [0.0, 1.0]]), 0.1)


def test_effective_dimension_monotone_and_bounded():
    K = kernel_matrix(FeatureMapSpec.rff(sigma=0.5), rng_for(1, "x").random((60, 1)))
    n = K.shape[0]
    top = np.linalg.eigvalsh(K / n).max()
    values = [empirical_effective_dimension(K, lam) for lam in np.logspace(-5, 1, 12)]
    assert all(a > b for a, b in zip(values, values[1:]))
    for lam, v in zip(np.logspace(-5, 1, 12), values):
        assert 0 < v <= n
        assert v >= top / (top + lam) - 1e-12


@pytest.mark.slow
def test_spline_effective_dimension_matches_gram():
    spec = FeatureMapSpec.spline(q=8.0)
    data = _uniform_data(2000)
    K = kernel_matrix(spec, data.X)
    emp = empirical_effective_dimension(K, 1e-2)
    ana = spline_effective_dimension(1e-2, 8.0)
    assert abs(emp - ana) <= 0.02 * ana


def test_leverage_scalar():
    spec = FeatureMapSpec.rff(sigma=1.0)
    data = Dataset([[0.4]], [0.0])
    sf = sample_features(spec, 6, seed=3)
    lam = 0.2
    scores = leverage_scores(sf.omegas, data, spec, lam)
    v = psi_matrix(spec, sf.omegas, data.X)[0]
    np.testing.assert_allclose(scores, v**2 / (1.0 + lam), rtol=1e-13)


def test_leverage_scores_bounds_and_monotone():
    spec = FeatureMapSpec.rff(sigma=0.5, dim=2)
    data = Dataset(rng_for(2, "x").random((50, 2)), np.zeros(50))
    sf = sample_features(spec, 40, seed=0)
    V = psi_matrix(spec, sf.omegas, data.X)
    prev = None
    for lam in np.logspace(-4, 0, 6):
        s = leverage_scores(sf.omegas, data, spec, lam)
        assert np.all(s >= 0)
        assert np.all(s <= np.sum(V**2, axis=0) / (lam * data.n) * (1 + 1e-10))
        if prev is not None:
            assert np.all(s <= prev * (1 + 1e-10))
        prev = s


def test_monte_carlo_single_draw_is_leverage():
    spec = FeatureMapSpec.rff(sigma=0.7)
    data = _uniform_data(30)
    est = monte_carlo_effective_dimension(spec, 0.01, 1, data, seed=5)
    from rfridge.feature_maps import sample_features as draw
    from rfridge.seeding import derive_seed

    sf = draw(spec, 1, derive_seed(5, "mc-effdim"))
    assert est == pytest.approx(leverage_scores(sf.omegas, data, spec, 0.01)[0], rel=1e-14)


def test_monte_carlo_large_lambda_below_one():
    # kappa^2 = 2 for random Fourier features.
    spec = FeatureMapSpec.rff(sigma=0.5)
    est = monte_carlo_effective_dimension(spec, 2.0, 200, _uniform_data(40), seed=1)
    assert est <= 1.0


def test_monte_carlo_agrees_with_plug_in():
    spec = FeatureMapSpec.spline(q=8.0)
    data = _uniform_data(500, seed=3)
    K = kernel_matrix(spec, data.X)
    lam = 1e-2
    est, se = monte_carlo_effective_dimension(spec, lam, 400, data, seed=2, K=K, return_stderr=True)
    emp = empirical_effective_dimension(K, lam)
    assert abs(est - emp) <= 3 * se + 1e-9


def test_spline_leverage_nearly_constant():
    spec = FeatureMapSpec.spline(q=8.0)
    data = _uniform_data(2000, seed=1)
    rep = spectral_report(data, spec, 1e-2, 500, seed=0)
    assert rep.leverage.max() / rep.leverage.min() <= 1.05
    assert rep.f_inf_hat == rep.leverage.max()
    assert rep.f_inf_hat >= rep.leverage.mean()
    assert 0 < rep.n_eff <= data.n


def test_resample_constant_scores_gives_unit_weights():
    pool = sample_features(FeatureMapSpec.rff(), 10, seed=0)
    sf = leverage_resample(pool, np.full(10, 2.5), 7, seed=1)
    np.testing.assert_allclose(sf.weights, 1.0)
    assert sf.M == 7


def test_resample_frequencies():
    pool = sample_features(FeatureMapSpec.rff(), 2, seed=0)
    M = 100_000
    sf = leverage_resample(pool, np.array([3.0, 1.0]), M, seed=9)
    first = np.mean(sf.omegas.arrays["b"] == pool.omegas.arrays["b"][0])
    assert abs(first - 0.75) < 3 * np.sqrt(0.75 * 0.25 / M)


def test_resample_degenerate():
    pool = sample_features(FeatureMapSpec.rff(), 3, seed=0)
    with pytest.raises(DegenerateDistributionError):
        leverage_resample(pool, np.zeros(3), 5, seed=0)


@settings(max_examples=30, deadline=None)
@given(scores=st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=20), seed=st.integers(0, 2**32))
def test_resample_weight_identity(scores, seed):
    # weight^2 * score equals the mean score for every drawn index.
    scores = np.array(scores)
    pool = sample_features(FeatureMapSpec.rff(), len(scores), seed=1)
    sf = leverage_resample(pool, scores, 25, seed)
    b = pool.omegas.arrays["b"]
    idx = np.array([int(np.flatnonzero(b == v)[0]) for v in sf.omegas.arrays["b"]])
    np.testing.assert_allclose(sf.weights**2 * scores[idx], scores.mean(), rtol=1e-12)


def test_resampled_gram_unbiased():
    spec = FeatureMapSpec.rff(sigma=0.5)
    X = rng_for(0, "gram").random((50, 1))
    pool = sample_features(spec, 200, seed=4)
    scores = leverage_scores(pool.omegas, Dataset(X, np.zeros(50)), spec, 1e-2)
    P = psi_matrix(spec, pool.omegas, X)
    target = P @ P.T / pool.M
    grams = []
    for r in range(20):
        A = feature_matrix(leverage_resample(pool, scores, 200, seed=r), X)
        grams.append(A @ A.T)
    grams = np.array(grams)
    se = grams.std(axis=0, ddof=1) / np.sqrt(len(grams))
    assert np.all(np.abs(grams.mean(axis=0) - target) <= 3 * se + 1e-12)
