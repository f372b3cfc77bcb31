import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rfridge.errors import DomainError, NumericalError
from rfridge.feature_maps import FeatureMapSpec, coordinate_features, feature_matrix, kernel_matrix, sample_features
from rfridge.ridge_solvers import (
    Dataset,
    KRRModel,
    LinearModel,
    empirical_risk,
    fit_krr,
    fit_linear_ridge,
    fit_rf_ridge,
    predict,
    spd_factor,
    spd_solve,
)
from rfridge.seeding import rng_for


def _regression(n=100, d=3, seed=0):
    rng = rng_for(seed, "reg")
    X = rng.standard_normal((n, d))
    y = np.sin(X @ np.arange(1, d + 1)) + 0.1 * rng.standard_normal(n)
    return Dataset(X, y)


def test_dataset_validation():
    with pytest.raises(DomainError):
        Dataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(DomainError):
        Dataset(np.array([[np.nan]]), np.zeros(1))
    with pytest.raises(DomainError):
        Dataset(np.zeros((0, 1)), np.zeros(0))
    assert Dataset(np.arange(4.0), np.zeros(4)).d == 1


@pytest.mark.parametrize("c, lam", [(1.0, 0.1), (-3.0, 2.0), (0.5, 1e-6)])
def test_krr_scalar(c, lam):
    model = fit_krr(Dataset([[0.2]], [c]), FeatureMapSpec.rff(sigma=1.0), lam)
    assert model.alpha[0] == pytest.approx(c / (1 + lam), rel=1e-14)


def test_krr_large_lambda_shrinks_to_zero():
    data = _regression(30, 2)
    spec = FeatureMapSpec.rff(sigma=1.0, dim=2)
    norms = [np.linalg.norm(fit_krr(data, spec, lam).alpha) for lam in (1e0, 1e3, 1e6)]
    assert norms[0] > norms[1] > norms[2]
    assert np.max(np.abs(predict(fit_krr(data, spec, 1e9), data.X))) < 1e-8


def test_linear_scalar():
    model = fit_linear_ridge(Dataset([[1.0]], [1.0]), 1.0)
    assert model.w[0] == pytest.approx(0.5)


def test_linear_orthogonal_design():
    n, lam = 8, 0.3
    X = np.sqrt(n) * np.eye(n)[:, :3]  # X^T X / n = I
    y = rng_for(0, "y").standard_normal(n)
    w = fit_linear_ridge(Dataset(X, y), lam).w
    np.testing.assert_allclose(w, (X.T @ y / n) / (1 + lam), rtol=1e-13)


def test_rf_zero_targets_give_zero_weights():
    data = Dataset(_regression(20).X, np.zeros(20))
    sf = sample_features(FeatureMapSpec.rff(dim=3), 15, seed=1)
    assert np.all(fit_rf_ridge(data, sf, 0.1).w == 0)


def test_risk_examples():
    data = Dataset([[0.0], [1.0]], [1.0, -1.0])
    assert empirical_risk(LinearModel(np.zeros(1), 1.0), data) == 1.0
    interp = fit_krr(data, FeatureMapSpec.rff(sigma=0.1), 1e-12)
    assert empirical_risk(interp, data) == pytest.approx(0.0, abs=1e-10)


def test_risk_matches_loop():
    data = _regression(100, 3, seed=4)
    sf = sample_features(FeatureMapSpec.rff(dim=3), 40, seed=2)
    model = fit_rf_ridge(data, sf, 1e-3)
    A = feature_matrix(sf, data.X)
    total = 0.0
    for i in range(data.n):
        pred = sum(A[i, j] * model.w[j] for j in range(sf.M))
        total += (pred - data.y[i]) ** 2
    assert empirical_risk(model, data) == pytest.approx(total / data.n, rel=1e-12)


@pytest.mark.parametrize("lam", [1e-4, 1e-2, 1.0])
def test_normal_equation_residuals(lam):
    data = _regression(80, 3)
    spec = FeatureMapSpec.rff(dim=3)
    sf = sample_features(spec, 50, seed=0)
    for model in (fit_krr(data, spec, lam), fit_rf_ridge(data, sf, lam), fit_linear_ridge(data, lam)):
        assert model.info.residual <= 1e-8
        assert not model.info.jittered

    K = kernel_matrix(spec, data.X)
    alpha = fit_krr(data, spec, lam).alpha
    r = (K + lam * data.n * np.eye(data.n)) @ alpha - data.y
    assert np.linalg.norm(r) <= 1e-8 * np.linalg.norm(data.y)


@pytest.mark.parametrize("seed", range(5))
def test_primal_dual_equivalence(seed):
    # Exactly factorized kernel: K = Phi Phi^T for a fixed finite feature map.
    data = _regression(100, 4, seed=seed)
    sf = coordinate_features(4)
    lam = 1e-2
    rf = fit_rf_ridge(data, sf, lam)
    spec = FeatureMapSpec.linear_sketch(dim=4)
    krr = fit_krr(data, spec, lam)
    Xt = rng_for(seed, "test").standard_normal((20, 4))
    p_rf, p_krr = predict(rf, Xt), predict(krr, Xt)
    assert np.linalg.norm(p_rf - p_krr) <= 1e-6 * np.linalg.norm(p_krr)


def test_random_features_primal_dual():
    data = _regression(60, 2, seed=3)
    sf = sample_features(FeatureMapSpec.rff(dim=2), 30, seed=3)
    lam = 1e-3
    A = feature_matrix(sf, data.X)
    rf = fit_rf_ridge(data, sf, lam, A=A)
    alpha = np.linalg.solve(A @ A.T + lam * data.n * np.eye(data.n), data.y)
    np.testing.assert_allclose(predict(rf, data.X), A @ A.T @ alpha, rtol=1e-6, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), lams=st.lists(st.floats(1e-6, 1e2), min_size=2, max_size=6, unique=True))
def test_training_error_monotone_in_lambda(seed, lams):
    data = _regression(40, 2, seed=seed % 1000)
    sf = sample_features(FeatureMapSpec.rff(dim=2), 20, seed=seed)
    risks = [empirical_risk(fit_rf_ridge(data, sf, lam), data) for lam in sorted(lams)]
    assert all(b >= a - 1e-10 for a, b in zip(risks, risks[1:]))


@settings(max_examples=30, deadline=None)
@given(A=arrays(np.float64, (5, 3), elements=st.floats(-10, 10)), lam=st.floats(1e-3, 10))
def test_spd_solve_residual(A, lam):
    G = A.T @ A + lam * np.eye(3)
    b = np.arange(1.0, 4.0)
    x, info = spd_solve(G, b)
    assert info.residual <= 1e-8


def test_jitter_escalation_on_singular_matrix():
    v = np.array([1.0, 1.0])
    A = np.outer(v, v)  # rank one, PSD
    _, jitter, tried = spd_factor(A)
    assert jitter > 0 and tried[0] == pytest.approx(1e-12 * np.trace(A) / 2)


def test_numerical_error_carries_jitters():
    A = -np.eye(3)
    with pytest.raises(NumericalError) as exc:
        spd_factor(A)
    assert len(exc.value.jitters) == 3


def test_nonpositive_lambda_rejected():
    with pytest.raises(DomainError):
        fit_linear_ridge(_regression(10), 0.0)


def test_predict_rejects_unknown_model():
    with pytest.raises(TypeError):
        predict(object(), np.zeros((1, 1)))


def test_krr_model_type():
    data = _regression(10, 1)
    assert isinstance(fit_krr(data, FeatureMapSpec.rff(), 0.1), KRRModel)
