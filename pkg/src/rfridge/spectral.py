"""Effective dimension, random-features leverage scores and leverage resampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DegenerateDistributionError, DomainError
from .feature_maps import (
    FeatureMapSpec,
    Frequencies,
    SampledFeatures,
    kernel_matrix,
    psi_matrix,
    sample_features,
)
from .ridge_solvers import Dataset, spd_factor
from .seeding import derive_seed, rng_for
from .spline import spline_effective_dimension

__all__ = [
    "SpectralReport",
    "empirical_effective_dimension",
    "spline_effective_dimension",
    "regularized_factor",
    "leverage_scores",
    "monte_carlo_effective_dimension",
    "leverage_resample",
    "spectral_report",
    "eigen_scorer",
]

# Matrix entries materialized per pool chunk.
_CHUNK_ENTRIES = 4_000_000
EIG_RTOL = 1e-6


@dataclass(frozen=True)
class SpectralReport:
    lam: float
    n_eff: float
    f_inf_hat: float
    leverage: np.ndarray
    pool: SampledFeatures


def _check_symmetric(K: np.ndarray) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DomainError("Gram matrix must be square")
    scale = max(np.max(np.abs(K)), np.finfo(float).tiny)
    if np.max(np.abs(K - K.T)) > 1e-10 * scale:
        raise DomainError("Gram matrix must be symmetric")
    return K


def regularized_factor(K: np.ndarray, lam: float):
    """Cholesky factor of ``K + lam n I``, shared by all score computations."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    n = K.shape[0]
    factor, _, _ = spd_factor(K + lam * n * np.eye(n))
    return factor


def empirical_effective_dimension(K: np.ndarray, lam: float, n: int | None = None) -> float:
    """Plug-in ``N_hat(lam) = tr(K (K + lam n I)^{-1})``."""
    K = _check_symmetric(K)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    n = K.shape[0] if n is None else int(n)
    m = K.shape[0]
    factor, _, _ = spd_factor(K + lam * n * np.eye(m))
    return float(np.trace(linalg.cho_solve(factor, K)))


def _pool_matrix(pool, data: Dataset, spec: FeatureMapSpec) -> np.ndarray:
    if isinstance(pool, SampledFeatures):
        return psi_matrix(spec, pool.omegas, data.X) * pool.weights[None, :]
    return psi_matrix(spec, pool, data.X)


def _pool_chunks(pool, n: int):
    size = len(pool) if isinstance(pool, Frequencies) else pool.M
    step = max(1, _CHUNK_ENTRIES // max(n, 1))
    for start in range(0, size, step):
        idx = np.arange(start, min(start + step, size))
        if isinstance(pool, Frequencies):
            yield pool.take(idx)
        else:
            yield SampledFeatures(pool.spec, pool.omegas.take(idx), pool.weights[idx], pool.seed)


def eigen_scorer(K: np.ndarray, lam: float, eig=None, rtol: float = EIG_RTOL):
    """Truncated spectral form of ``v -> v^T (K + lam n I)^{-1} v``.

    With ``K = U diag(e) U^T`` and ``c = lam n``,
    ``v^T (K + c I)^{-1} v = |v|^2 / c - sum_i (u_i^T v)^2 e_i / (c (e_i + c))``.
    Dropping the terms with ``e_i <= rtol c^2 / (e_max + c)`` changes every
    score by a relative amount of at most ``rtol``: the dropped sum is at most
    ``e_thr |v|^2 / c^2`` while the score is at least ``|v|^2 / (e_max + c)``.
    Scores only shape the proposal law of :func:`leverage_resample`, whose
    importance weights keep the resampled Gram unbiased for any positive
    scores, so ``rtol = 1e-6`` costs nothing in accuracy.

    Returns ``(c, U_kept, factors)`` for use by :func:`leverage_scores`.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    c = lam * K.shape[0]
    evals, U = linalg.eigh(K, driver="evd") if eig is None else eig
    keep = evals > rtol * c * c / (max(evals.max(), 0.0) + c)
    e = evals[keep]
    return c, np.ascontiguousarray(U[:, keep]), e / (c * (e + c))


def leverage_scores(pool, data: Dataset, spec: FeatureMapSpec, lam: float,
                    K: np.ndarray | None = None, factor=None, scorer=None) -> np.ndarray:
    """Empirical leverage ``s_hat(omega) = v^T (K + lam n I)^{-1} v``, ``v_i = psi(x_i, omega)``.

    ``pool`` is a :class:`Frequencies` batch or a :class:`SampledFeatures`
    (whose importance weights then multiply ``psi``). The quadratic form uses
    a Cholesky ``factor`` of ``K + lam n I`` (computed if absent), or the
    truncated eigenbasis returned by :func:`eigen_scorer` when ``scorer`` is
    given. The pool is processed in chunks to bound memory.
    """
    if len(pool if isinstance(pool, Frequencies) else pool.omegas) < 1:
        raise DomainError("empty candidate pool")
    if scorer is None and factor is None:
        if K is None:
            K = kernel_matrix(spec, data.X)
        factor = regularized_factor(K, lam)
    parts = []
    for chunk in _pool_chunks(pool, data.n):
        V = _pool_matrix(chunk, data, spec)
        if scorer is None:
            parts.append(np.einsum("ij,ij->j", V, linalg.cho_solve(factor, V)))
        else:
            c, U, f = scorer
            P = U.T @ V
            parts.append(np.einsum("ij,ij->j", V, V) / c - f @ (P * P))
    return np.maximum(np.concatenate(parts), 0.0)


def monte_carlo_effective_dimension(spec: FeatureMapSpec, lam: float, n_omega: int,
                                    data: Dataset, seed: int = 0, K: np.ndarray | None = None,
                                    return_stderr: bool = False):
    """Estimate ``N(lam) = E_omega |(L + lam I)^{-1/2} psi_omega|^2``.

    The operator ``L`` is replaced by its empirical version on ``data``, in
    which case each summand is the leverage score of a fresh ``omega ~ pi``.
    """
    sf = sample_features(spec, n_omega, derive_seed(seed, "mc-effdim"))
    s = leverage_scores(sf.omegas, data, spec, lam, K=K)
    est = float(s.mean())
    if not return_stderr:
        return est
    se = float(s.std(ddof=1) / np.sqrt(n_omega)) if n_omega > 1 else float("inf")
    return est, se


def leverage_resample(pool: SampledFeatures, scores, M: int, seed: int) -> SampledFeatures:
    """Problem-dependent features from a candidate pool.

    Draws ``M`` pool indices with probability proportional to ``scores``
    and sets the weight ``base_weight * sqrt(C / score)`` with ``C`` the mean
    score, so ``E[w^2 psi psi]`` equals the pool-uniform average of
    ``base_weight^2 psi psi``.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (pool.M,):
        raise DomainError("one score per pool element required")
    if np.any(scores < 0) or not np.all(np.isfinite(scores)):
        raise DomainError("scores must be finite and nonnegative")
    total = scores.sum()
    if not total > 0:
        raise DegenerateDistributionError("all leverage scores are zero")
    if int(M) != M or M < 1:
        raise DomainError("M must be a positive integer")
    rng = rng_for(seed, "leverage-resample")
    idx = rng.choice(pool.M, size=int(M), replace=True, p=scores / total)
    c_tilde = scores.mean()
    weights = pool.weights[idx] * np.sqrt(c_tilde / scores[idx])
    return SampledFeatures(pool.spec, pool.omegas.take(idx), weights, seed)


def spectral_report(data: Dataset, spec: FeatureMapSpec, lam: float, pool_size: int,
                    seed: int, K: np.ndarray | None = None) -> SpectralReport:
    if K is None:
        K = kernel_matrix(spec, data.X)
    pool = sample_features(spec, pool_size, derive_seed(seed, "pool"))
    lev = leverage_scores(pool, data, spec, lam, K=K)
    n_eff = empirical_effective_dimension(K, lam)
    return SpectralReport(lam, n_eff, float(lev[int(np.argmax(lev))]), lev, pool)
