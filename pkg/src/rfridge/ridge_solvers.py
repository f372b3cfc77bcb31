"""Ridge estimators: exact kernel ridge, linear ridge and random-features ridge.

Scaling convention: the ``n^{-1/2}`` factors on the feature matrix and on
``y`` are folded into normal equations divided by ``n``. For features
``A = feature_matrix(sf, X)`` the weights solve

    (A^T A / n + lam I) w = A^T y / n

and exact KRR solves ``(K + lam n I) alpha = y``. With more features than
samples the random-features weights come from the dual system
``(A A^T + lam n I) alpha = y``, ``w = A^T alpha``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DomainError, NumericalError
from .feature_maps import FeatureMapSpec, SampledFeatures, feature_matrix, kernel_matrix

__all__ = [
    "Dataset",
    "SolveInfo",
    "KRRModel",
    "RFModel",
    "LinearModel",
    "spd_factor",
    "spd_solve",
    "fit_krr",
    "fit_rf_ridge",
    "solve_rf_ridge",
    "fit_linear_ridge",
    "predict",
    "empirical_risk",
]

log = logging.getLogger(__name__)

JITTER_START = 1e-12
JITTER_ATTEMPTS = 3


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] < 1:
            raise DomainError("dataset must contain at least one sample")
        if X.shape[0] != y.shape[0]:
            raise DomainError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DomainError("dataset contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class SolveInfo:
    """Audit record for one SPD solve."""

    jitter: float = 0.0
    attempts: tuple[float, ...] = ()
    residual: float = 0.0

    @property
    def jittered(self) -> bool:
        return self.jitter > 0


def spd_factor(A: np.ndarray):
    """Cholesky factor of a symmetric positive-definite matrix, with jitter fallback.

    On failure, ``jitter * I`` is added starting at ``1e-12 * trace / dim``
    and multiplied by ten, for at most three attempts.

    Returns
    -------
    factor : tuple
        Output of :func:`scipy.linalg.cho_factor`, for the (possibly jittered) matrix.
    jitter : float
        Diagonal shift actually used (0.0 when none was needed).
    attempts : tuple of float
        Every jitter value tried.
    """
    A = np.asarray(A, dtype=float)
    try:
        return linalg.cho_factor(A, lower=True, check_finite=True), 0.0, ()
    except linalg.LinAlgError:
        pass
    dim = A.shape[0]
    jitter = JITTER_START * max(np.trace(A), np.finfo(float).tiny) / dim
    tried = []
    for _ in range(JITTER_ATTEMPTS):
        tried.append(jitter)
        try:
            factor = linalg.cho_factor(A + jitter * np.eye(dim), lower=True)
            log.warning("SPD factorization needed jitter %.3g", jitter)
            return factor, jitter, tuple(tried)
        except linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError("SPD factorization failed after jitter escalation", tried)


def spd_solve(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, SolveInfo]:
    factor, jitter, tried = spd_factor(A)
    x = linalg.cho_solve(factor, b)
    r = A @ x - b
    scale = max(np.linalg.norm(b), np.finfo(float).tiny)
    return x, SolveInfo(jitter, tried, float(np.linalg.norm(r) / scale))


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam > 0 or not np.isfinite(lam):
        raise DomainError(f"lambda must be a positive finite number, got {lam}")
    return lam


@dataclass(frozen=True)
class KRRModel:
    alpha: np.ndarray
    centers: np.ndarray
    lam: float
    spec: FeatureMapSpec
    info: SolveInfo = field(default_factory=SolveInfo)


@dataclass(frozen=True)
class RFModel:
    w: np.ndarray
    features: SampledFeatures
    lam: float
    info: SolveInfo = field(default_factory=SolveInfo)

    @property
    def M(self) -> int:
        return self.features.M


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    lam: float
    info: SolveInfo = field(default_factory=SolveInfo)


def fit_krr(data: Dataset, spec: FeatureMapSpec, lam: float, K: np.ndarray | None = None) -> KRRModel:
    """Exact kernel ridge regression, ``alpha = (K + lam n I)^{-1} y``.

    ``K`` may be passed to reuse a precomputed Gram matrix.
    """
    lam = _check_lambda(lam)
    if K is None:
        K = kernel_matrix(spec, data.X)
    n = data.n
    alpha, info = spd_solve(K + lam * n * np.eye(n), data.y)
    return KRRModel(alpha, data.X, lam, spec, info)


def _ridge_normal(A: np.ndarray, y: np.ndarray, lam: float):
    n, m = A.shape
    # O(n m^2 + m^3) time, O(n m) space.
    G = A.T @ A / n
    G[np.diag_indices(m)] += lam
    return spd_solve(G, A.T @ y / n)


def _ridge_dual(A: np.ndarray, y: np.ndarray, lam: float):
    # Same w through (A^T A + lam n I)^{-1} A^T = A^T (A A^T + lam n I)^{-1};
    # O(n^2 m + n^3) time, used when m > n.
    n = A.shape[0]
    G = A @ A.T
    G[np.diag_indices(n)] += lam * n
    alpha, info = spd_solve(G, y)
    return A.T @ alpha, info


def solve_rf_ridge(A: np.ndarray, y: np.ndarray, lam: float):
    """Ridge weights ``w`` for a feature matrix ``A``: primal when ``M <= n``, dual otherwise.

    Returns ``(w, SolveInfo)``.
    """
    lam = _check_lambda(lam)
    if A.shape[1] > A.shape[0]:
        return _ridge_dual(A, y, lam)
    return _ridge_normal(A, y, lam)


def fit_rf_ridge(data: Dataset, sf: SampledFeatures, lam: float, A: np.ndarray | None = None) -> RFModel:
    """Random-features ridge regression on ``phi_M``.

    ``A`` may be passed to reuse a precomputed ``feature_matrix(sf, data.X)``.
    When ``M > n`` the equivalent ``n x n`` dual system is solved instead;
    the recorded residual then refers to that system.
    """
    lam = _check_lambda(lam)
    if A is None:
        A = feature_matrix(sf, data.X)
    w, info = solve_rf_ridge(A, data.y, lam)
    return RFModel(w, sf, lam, info)


def fit_linear_ridge(data: Dataset, lam: float) -> LinearModel:
    """Ordinary ridge regression, ``(X^T X / n + lam I) w = X^T y / n``."""
    lam = _check_lambda(lam)
    w, info = _ridge_normal(data.X, data.y, lam)
    return LinearModel(w, lam, info)


def predict(model, X_new) -> np.ndarray:
    X_new = np.asarray(X_new, dtype=float)
    if isinstance(model, KRRModel):
        out = kernel_matrix(model.spec, X_new, model.centers) @ model.alpha
    elif isinstance(model, RFModel):
        out = feature_matrix(model.features, X_new) @ model.w
    elif isinstance(model, LinearModel):
        out = (X_new[:, None] if X_new.ndim == 1 else X_new) @ model.w
    else:
        raise TypeError(f"cannot predict with {type(model).__name__}")
    if not np.all(np.isfinite(out)):
        raise DomainError("non-finite predictions")
    return out


def empirical_risk(model, data: Dataset) -> float:
    """Mean squared error of ``model`` on ``data``."""
    if data.n == 0:
        raise DomainError("empty dataset")
    r = predict(model, data.X) - data.y
    return float(np.mean(r * r))
