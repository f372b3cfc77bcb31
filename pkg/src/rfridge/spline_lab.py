"""Rate-validation experiment on the periodic spline kernel.

Setting: ``x ~ U[0, 1]``, ``y = f*(x) + sigma g`` with ``g ~ N(0, 1)``,
kernel ``K = Lambda_{1/gamma}``, features ``psi(omega, x) = Lambda_{1/(2 gamma)}(omega, x)``
with ``omega ~ U[0, 1)``, and target ``f* = Lambda_{r/gamma + 1/2 + eps}(., x0)``.

Because the input law is uniform, ``{exp(2 pi i k x)}`` is orthonormal in
``L^2(rho_X)`` and the excess risk ``|f_hat - f*|^2`` of any finite
combination of splines is an exact sum over Fourier coefficients.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import linalg

from . import spline
from .errors import ConfigurationError, DomainError, NumericalError, RFRidgeError, SaturationError
from .feature_maps import FeatureMapSpec, feature_matrix, kernel_matrix, psi_matrix, sample_features
from .ridge_solvers import Dataset, RFModel, fit_rf_ridge, solve_rf_ridge
from .seeding import derive_seed, rng_for
from .spectral import eigen_scorer, leverage_resample, leverage_scores

__all__ = [
    "Sampling",
    "SplineExperimentConfig",
    "FourierModel",
    "RateRow",
    "RateResult",
    "target_function",
    "generate_data",
    "fourier_coefficients",
    "analytic_excess_risk",
    "excess_risk_tail_bound",
    "krr_fourier_model",
    "rf_fourier_model",
    "select_lambda",
    "minimal_M_search",
    "run_cell",
    "run_rate_experiment",
    "fit_loglog_slope",
    "predicted_exponents",
]

log = logging.getLogger(__name__)

_EXP_BLOCK = 64


class Sampling(str, enum.Enum):
    PLAIN = "plain"
    LEVERAGE = "leverage"


@dataclass(frozen=True)
class SplineExperimentConfig:
    gamma: float = 1 / 8
    r: float = 11 / 16
    epsilon: float = 0.05
    x0: float = 0.37
    sigma_noise: float = 0.3
    K_max: int = spline.DEFAULT_K_MAX
    n_grid: tuple[int, ...] = (250, 500, 1000, 2000, 4000)
    reps: int = 10
    lambda_grid_size: int = 40
    risk_tolerance: float = 0.05
    sampling: Sampling = Sampling.LEVERAGE
    master_seed: int = 0
    redraws: int = 5
    m_start: int = 4
    pool_factor: int = 4
    saturation_factor: int = 8

    def __post_init__(self):
        object.__setattr__(self, "sampling", Sampling(self.sampling))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if not 0 < self.gamma < 1:
            raise ConfigurationError("gamma must lie in (0, 1)")
        if not 0.5 <= self.r <= 1:
            raise ConfigurationError("r must lie in [1/2, 1]")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if not 0 <= self.x0 <= 1:
            raise ConfigurationError("x0 must lie in [0, 1]")
        if not self.sigma_noise > 0:
            raise ConfigurationError("sigma_noise must be positive")
        if self.K_max < 1 or self.reps < 1 or self.lambda_grid_size < 1 or self.redraws < 1:
            raise ConfigurationError("K_max, reps, lambda_grid_size and redraws must be positive")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ConfigurationError("n_grid must hold positive integers")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigurationError("n_grid must be strictly increasing")
        if not self.risk_tolerance >= 0:
            raise ConfigurationError("risk_tolerance must be nonnegative")
        if self.m_start < 1 or self.pool_factor < 1 or self.saturation_factor < 1:
            raise ConfigurationError("m_start, pool_factor and saturation_factor must be positive")

    @classmethod
    def config_a(cls, **kw):
        return cls(gamma=1 / 8, r=11 / 16, **kw)

    @classmethod
    def config_b(cls, **kw):
        return cls(gamma=1 / 4, r=7 / 8, **kw)

    @property
    def kernel_order(self) -> float:
        return 1.0 / self.gamma

    @property
    def feature_order(self) -> float:
        return 0.5 / self.gamma

    @property
    def target_order(self) -> float:
        return self.r / self.gamma + 0.5 + self.epsilon

    @property
    def feature_spec(self) -> FeatureMapSpec:
        return FeatureMapSpec.spline(q=self.kernel_order, k_max=self.K_max)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sampling"] = self.sampling.value
        d["n_grid"] = list(self.n_grid)
        return d


# ---------------------------------------------------------------------------
# Data and Fourier-domain risk
# ---------------------------------------------------------------------------


def target_function(cfg: SplineExperimentConfig, x) -> np.ndarray:
    """``f*(x) = Lambda_{r/gamma + 1/2 + eps}(x, x0)``."""
    x = np.asarray(x, dtype=float)
    return spline.spline_kernel(x - cfg.x0, cfg.target_order, cfg.K_max)


def generate_data(cfg: SplineExperimentConfig, n: int, seed: int, sigma: float | None = None) -> Dataset:
    if n < 1:
        raise DomainError("n must be positive")
    sigma = cfg.sigma_noise if sigma is None else sigma
    rng = rng_for(seed, "data")
    x = rng.random(n)
    g = rng.standard_normal(n)
    return Dataset(x[:, None], target_function(cfg, x) + sigma * g)


@dataclass(frozen=True)
class FourierModel:
    """``f_hat = sum_j coeffs[j] * Lambda_{orders[j]}(centers[j], .)``."""

    centers: np.ndarray
    coeffs: np.ndarray
    orders: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.centers, dtype=float))
        a = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        q = np.broadcast_to(np.asarray(self.orders, dtype=float), c.shape).copy()
        if not (c.shape == a.shape):
            raise DomainError("centers and coeffs must have equal length")
        if not np.all(np.isfinite(a)):
            raise DomainError("coefficients must be finite")
        if np.any(q <= 0.5):
            raise DomainError("orders must exceed 1/2 for a square-integrable model")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "coeffs", a)
        object.__setattr__(self, "orders", q)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0), np.zeros(0), np.zeros(0))

    def __len__(self):
        return len(self.centers)

    def __call__(self, x, k_max: int = spline.DEFAULT_K_MAX):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for q in np.unique(self.orders):
            sel = self.orders == q
            K = spline.spline_kernel(self.centers[sel][None, :] - x.ravel()[:, None], q, k_max)
            out += (K @ self.coeffs[sel]).reshape(x.shape)
        return out


def _exp_sums(centers: np.ndarray, C: np.ndarray, k_max: int) -> np.ndarray:
    """``S[k-1, l] = sum_j C[j, l] exp(-2 pi i k t_j)`` for ``k = 1..k_max``.

    Frequencies are processed in blocks ``k = s + b``: the factor
    ``exp(-2 pi i b t)`` is shared by every block and ``exp(-2 pi i s t)`` is
    evaluated directly once per block, so the bulk of the work is a
    complex matrix product.
    """
    t = np.asarray(centers, dtype=float)
    C = np.asarray(C).reshape(len(t), -1)
    out = np.zeros((k_max, C.shape[1]), dtype=complex)
    if len(t) == 0:
        return out
    block = min(_EXP_BLOCK, k_max)
    inner = np.exp(-2j * np.pi * np.outer(t, np.arange(1, block + 1)))  # (M, block)
    inner_t = np.ascontiguousarray(inner.T)
    for s in range(0, k_max, block):
        width = min(block, k_max - s)
        shift = np.exp(-2j * np.pi * np.mod(s * t, 1.0))
        out[s:s + width] = inner_t[:width] @ (shift[:, None] * C)
    return out


def fourier_coefficients(model: FourierModel, k_max: int) -> np.ndarray:
    """Coefficients ``F_k`` of ``exp(2 pi i k x)`` for ``k = 1..k_max``."""
    k = np.arange(1, k_max + 1, dtype=float)
    out = np.zeros(k_max, dtype=complex)
    for q in np.unique(model.orders):
        sel = model.orders == q
        out += _exp_sums(model.centers[sel], model.coeffs[sel], k_max)[:, 0] * k ** (-q)
    return out


def target_coefficients(cfg: SplineExperimentConfig, k_max: int | None = None) -> np.ndarray:
    k_max = cfg.K_max if k_max is None else k_max
    k = np.arange(1, k_max + 1, dtype=float)
    return k ** (-cfg.target_order) * np.exp(-2j * np.pi * k * cfg.x0)


def excess_risk_tail_bound(model: FourierModel, cfg: SplineExperimentConfig) -> float:
    """Bound on the frequencies ``|k| > K_max`` left out of the risk sum."""
    K = float(cfg.K_max)
    s = cfg.target_order
    bound = 4.0 * K ** (1 - 2 * s) / (2 * s - 1)
    if len(model):
        qmin = float(model.orders.min())
        l1 = float(np.abs(model.coeffs).sum())
        bound += 4.0 * l1**2 * K ** (1 - 2 * qmin) / (2 * qmin - 1)
    return bound


def _risk_from_coeffs(F: np.ndarray, fstar: np.ndarray) -> np.ndarray:
    # Real functions: the k and -k terms are conjugate, so double the k > 0 half.
    diff = F - (fstar[:, None] if F.ndim == 2 else fstar)
    return 2.0 * np.sum(diff.real**2 + diff.imag**2, axis=0)


def analytic_excess_risk(model: FourierModel, cfg: SplineExperimentConfig, return_bound: bool = False):
    """``|f_hat - f*|^2_{L^2[0,1]}`` summed over ``0 < |k| <= K_max``."""
    risk = float(_risk_from_coeffs(fourier_coefficients(model, cfg.K_max), target_coefficients(cfg)))
    if return_bound:
        return risk, excess_risk_tail_bound(model, cfg)
    return risk


def krr_fourier_model(cfg: SplineExperimentConfig, data: Dataset, alpha) -> FourierModel:
    return FourierModel(data.X[:, 0], alpha, cfg.kernel_order)


def rf_fourier_model(cfg: SplineExperimentConfig, model) -> FourierModel:
    """Expand ``phi_M(x)^T w`` into spline terms centred at the frequencies."""
    sf = model.features
    coeffs = model.w * sf.weights / np.sqrt(sf.M)
    return FourierModel(sf.omegas.arrays["omega"], coeffs, sf.spec.psi_order)


# ---------------------------------------------------------------------------
# lambda selection and minimal M search
# ---------------------------------------------------------------------------


def lambda_grid(cfg: SplineExperimentConfig, n: int) -> np.ndarray:
    return np.logspace(np.log10(1.0 / n), 0.0, cfg.lambda_grid_size)


def select_lambda(cfg: SplineExperimentConfig, data: Dataset, n: int | None = None,
                  K: np.ndarray | None = None, return_curve: bool = False, eig=None):
    """Pick the grid ``lambda`` minimizing the analytic KRR excess risk.

    All grid points share one eigendecomposition of the Gram matrix
    (pass ``eig = (evals, U)`` to reuse one);
    ``alpha(lam) = U (w + lam n)^{-1} U^T y``. Ties go to the smaller ``lambda``.
    """
    n = data.n if n is None else int(n)
    if K is None:
        K = kernel_matrix(cfg.feature_spec, data.X)
    grid = lambda_grid(cfg, n)
    evals, U = linalg.eigh(K, driver="evd") if eig is None else eig
    uy = U.T @ data.y
    alphas = U @ (uy[:, None] / (evals[:, None] + grid[None, :] * data.n))
    k = np.arange(1, cfg.K_max + 1, dtype=float)
    F = _exp_sums(data.X[:, 0], alphas, cfg.K_max) * (k ** (-cfg.kernel_order))[:, None]
    risks = _risk_from_coeffs(F, target_coefficients(cfg))
    best = int(np.argmin(risks))
    if return_curve:
        return float(grid[best]), float(risks[best]), grid, risks
    return float(grid[best]), float(risks[best])


def _fit_merged(data: Dataset, sf, lam: float) -> RFModel:
    """RF ridge with repeated frequencies folded into one column each.

    ``c`` identical columns ``a`` act like the single column ``sqrt(c) a``
    with weight ``w'``, each copy getting ``w' / sqrt(c)``; fit and penalty
    are unchanged. Leverage resampling repeats about a tenth of its draws.
    """
    omega = sf.omegas.arrays["omega"]
    _, first, inverse, counts = np.unique(omega, return_index=True, return_inverse=True, return_counts=True)
    if len(first) == sf.M:
        return fit_rf_ridge(data, sf, lam, A=feature_matrix(sf, data.X))
    A = psi_matrix(sf.spec, sf.omegas.take(first), data.X)
    A *= (sf.weights[first] * np.sqrt(counts / sf.M))[None, :]
    w, info = solve_rf_ridge(A, data.y, lam)
    return RFModel(w[inverse] / np.sqrt(counts[inverse]), sf, lam, info)


# Scores only shape the resampling proposal (the importance weights keep the
# features unbiased), so a 0.1% score error is harmless and much cheaper.
_SCORE_RTOL = 1e-3


class _RiskOracle:
    """Mean RF excess risk over feature redraws, cached per M."""

    def __init__(self, cfg, data, lam, seed, K=None, eig=None):
        self.cfg, self.data, self.lam, self.seed = cfg, data, lam, seed
        self._eig = eig
        self._scorer = None
        self.spec = cfg.feature_spec
        self.fstar = target_coefficients(cfg)
        self.cache: dict[int, float] = {}
        self._K = K
        self._scores: dict[int, np.ndarray] = {}

    def scorer(self):
        if self._scorer is None:
            K = self._K if self._K is not None else kernel_matrix(self.spec, self.data.X)
            self._scorer = eigen_scorer(K, self.lam, self._eig, rtol=_SCORE_RTOL)
        return self._scorer

    def pool_scores(self, size: int, redraw: int):
        # Pools come from a prefix-stable stream, so scores of earlier
        # candidates are reused when the pool grows.
        pool = sample_features(self.spec, size, derive_seed(self.seed, "pool", redraw))
        known = self._scores.get(redraw, np.zeros(0))
        if len(known) < size:
            fresh = pool.omegas.take(np.arange(len(known), size))
            extra = leverage_scores(fresh, self.data, self.spec, self.lam, scorer=self.scorer())
            known = np.concatenate([known, extra])
            self._scores[redraw] = known
        return pool, known[:size]

    def features(self, M: int, redraw: int):
        cfg = self.cfg
        if cfg.sampling == Sampling.PLAIN:
            return sample_features(self.spec, M, derive_seed(self.seed, "plain", redraw))
        pool, scores = self.pool_scores(cfg.pool_factor * M, redraw)
        return leverage_resample(pool, scores, M, derive_seed(self.seed, "resample", M, redraw))

    def __call__(self, M: int) -> float:
        if M not in self.cache:
            risks = []
            for r in range(self.cfg.redraws):
                sf = self.features(M, r)
                model = _fit_merged(self.data, sf, self.lam)
                fm = rf_fourier_model(self.cfg, model)
                risks.append(_risk_from_coeffs(fourier_coefficients(fm, self.cfg.K_max), self.fstar))
            self.cache[M] = float(np.mean(risks))
        return self.cache[M]


def minimal_M_search(cfg: SplineExperimentConfig, data: Dataset, lambda_star: float,
                     krr_risk: float, seed: int = 0, K: np.ndarray | None = None,
                     eig=None) -> tuple[int, float]:
    """Smallest M whose mean RF risk is within ``(1 + risk_tolerance)`` of KRR.

    Doubling from ``m_start`` to the first success, then bisection down to a
    resolution of ``ceil(M / 16)``. Raises :class:`SaturationError` past
    ``saturation_factor * n`` features.
    """
    if not krr_risk > 0:
        raise DomainError("krr_risk must be positive")
    target = (1.0 + cfg.risk_tolerance) * krr_risk
    risk = _RiskOracle(cfg, data, lambda_star, seed, K, eig)
    cap = cfg.saturation_factor * data.n
    lo, hi = None, cfg.m_start
    while risk(hi) > target:
        if hi >= cap:
            raise SaturationError(f"no M <= {cap} reaches the risk target")
        lo, hi = hi, min(2 * hi, cap)
    if lo is None:
        return hi, risk(hi)
    while hi - lo > math.ceil(hi / 16):
        mid = (lo + hi) // 2
        if risk(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi, risk(hi)


# ---------------------------------------------------------------------------
# Full experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateRow:
    n: int
    rep: int
    lambda_star: float
    krr_risk: float
    m_star: int
    rf_risk: float
    status: str = "ok"


@dataclass(frozen=True)
class RateResult:
    rows: tuple[RateRow, ...]
    slopes: dict = field(default_factory=dict)
    predicted: dict = field(default_factory=dict)
    failures: int = 0

    def medians(self, quantity: str) -> list[tuple[int, float]]:
        ok = [r for r in self.rows if r.status == "ok"]
        out = []
        for n in sorted({r.n for r in ok}):
            vals = [getattr(r, quantity) for r in ok if r.n == n]
            out.append((n, float(np.median(vals))))
        return out


QUANTITIES = (("risk", "rf_risk"), ("lambda", "lambda_star"), ("m", "m_star"))


def predicted_exponents(cfg: SplineExperimentConfig, alpha: float | None = None) -> dict:
    """Exponents of ``n`` for the excess risk, ``lambda_n`` and ``M_n``.

    ``alpha`` is the compatibility exponent of the features; spline features
    have ``alpha = gamma`` under either sampling scheme.
    """
    g, r = cfg.gamma, cfg.r
    a = g if alpha is None else alpha
    return {
        "risk": -2 * r / (2 * r + g),
        "lambda": -1 / (2 * r + g),
        "m": (a + (1 + g - a) * (2 * r - 1)) / (2 * r + g),
    }


def run_cell(cfg: SplineExperimentConfig, n_index: int, rep: int) -> RateRow:
    n = cfg.n_grid[n_index]
    seed = derive_seed(cfg.master_seed, n_index, rep)
    try:
        data = generate_data(cfg, n, derive_seed(seed, "data"))
        K = kernel_matrix(cfg.feature_spec, data.X)
        eig = linalg.eigh(K, driver="evd")
        lam, krr_risk = select_lambda(cfg, data, K=K, eig=eig)
    except RFRidgeError as exc:
        log.warning("cell n=%d rep=%d failed: %s", n, rep, exc)
        return RateRow(n, rep, math.nan, math.nan, 0, math.nan, f"error:{type(exc).__name__}")
    try:
        m_star, rf_risk = minimal_M_search(cfg, data, lam, krr_risk, derive_seed(seed, "msearch"), K=K, eig=eig)
    except SaturationError:
        return RateRow(n, rep, lam, krr_risk, 0, math.nan, "saturated")
    except (NumericalError, DomainError) as exc:
        log.warning("cell n=%d rep=%d failed: %s", n, rep, exc)
        return RateRow(n, rep, lam, krr_risk, 0, math.nan, f"error:{type(exc).__name__}")
    return RateRow(n, rep, lam, krr_risk, int(m_star), rf_risk)


def _cell(args):
    cfg, i, rep = args
    return run_cell(cfg, i, rep)


def run_rate_experiment(cfg: SplineExperimentConfig, workers: int = 1, progress=None) -> RateResult:
    """Run every ``(n, rep)`` cell and fit log-log slopes on per-n medians."""
    tasks = [(cfg, i, rep) for i in range(len(cfg.n_grid)) for rep in range(cfg.reps)]
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for row in ex.map(_cell, tasks):
                rows.append(row)
                if progress:
                    progress(row)
    else:
        for t in tasks:
            row = _cell(t)
            rows.append(row)
            if progress:
                progress(row)
    rows.sort(key=lambda r: (r.n, r.rep))
    result = RateResult(tuple(rows), {}, predicted_exponents(cfg),
                        sum(r.status != "ok" for r in rows))
    slopes = {}
    for name, attr in QUANTITIES:
        pts = result.medians(attr)
        try:
            slopes[name] = fit_loglog_slope(pts)
        except DomainError:
            slopes[name] = (math.nan, math.nan)
    return replace(result, slopes=slopes)


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """OLS slope of ``log(value)`` on ``log(n)`` and its standard error."""
    pts = [(float(n), float(v)) for n, v in points]
    if any(not v > 0 for _, v in pts):
        raise DomainError("log-log fit needs positive values")
    if len({n for n, _ in pts}) < 3:
        raise DomainError("log-log fit needs at least three distinct n")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean()) / sxx)
    resid = y - y.mean() - slope * xc
    dof = len(pts) - 2
    stderr = float(np.sqrt(max(resid @ resid, 0.0) / dof / sxx)) if dof > 0 else math.nan
    return slope, stderr
