"""Random feature constructions ``psi(x, omega)`` with their sampling laws.

Each family provides an integral representation

    K(x, x') = E_{omega ~ pi} [ psi(x, omega) psi(x', omega) ]

together with an exact evaluator of ``K`` so the Monte Carlo identity can be
checked. A drawn set of frequencies defines the finite map

    phi_M(x) = M^{-1/2} (weight_1 psi(x, omega_1), ..., weight_M psi(x, omega_M)).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import pi
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import spline
from .errors import CapabilityError, ConfigurationError, DomainError
from .seeding import derive_seed, rng_for

__all__ = [
    "Family",
    "FeatureMapSpec",
    "Frequencies",
    "SampledFeatures",
    "sample_features",
    "psi",
    "psi_matrix",
    "feature_matrix",
    "exact_kernel",
    "kernel_matrix",
    "kernel_bias_bound",
    "sample_domain",
    "coordinate_features",
    "approx_error_report",
    "ARCCOS_CONSTANT",
]

# Frequencies are drawn in fixed-size blocks, each from its own stream, so the
# first M draws do not change when M grows.
BLOCK_SIZE = 64

# E[psi(x) psi(z)] = ARCCOS_CONSTANT * |x|^p |z|^p J_p(theta) for standard
# Gaussian omega. Fixed by the Monte Carlo oracle in scripts/calibrate_arccos.py.
ARCCOS_CONSTANT = 1.0 / (2.0 * pi)

_DOMAIN_TOL = 1e-12


class Family(str, enum.Enum):
    RFF = "rff"
    GAUSSIAN_TAYLOR = "gaussian_taylor"
    DOT_PRODUCT = "dot_product"
    ARC_COSINE = "arc_cosine"
    SIGN_SKETCH = "sign_sketch"
    LINEAR_SKETCH = "linear_sketch"
    LAPLACE_SEMIGROUP = "laplace_semigroup"
    HOMOGENEOUS_ADDITIVE = "homogeneous_additive"
    SPLINE = "spline"


def _exponential_sampler(rng, size, dim):
    return rng.exponential(size=(size, dim))


def _laplace_default_kernel(s):
    # Laplace transform of prod_j exp(-omega_j) evaluated at s = x + z.
    return np.prod(1.0 / (1.0 + s), axis=-1)


def _hyperbolic_secant_sampler(rng, size, dim):
    # Density sech(pi w) on the real line: inverse CDF (1/pi) log tan(pi u / 2).
    u = rng.uniform(np.finfo(float).tiny, 1.0, size=(size, dim))
    return np.log(np.tan(0.5 * pi * u)) / pi


def _chi2_kernel(s, t):
    total = s + t
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, 2.0 * s * t / np.where(total > 0, total, 1.0), 0.0)


@dataclass(frozen=True)
class FeatureMapSpec:
    """Kernel family plus its parameters.

    Only the fields relevant to ``family`` are read. ``sigma`` is the
    Gaussian bandwidth for RFF (kernel ``exp(-|x-x'|^2 / (2 sigma^2))``) and
    the inverse bandwidth for the Taylor construction (kernel
    ``exp(-sigma^2 |x-x'|^2 / 2)``), matching how each is usually written.
    """

    family: Family
    dim: int = 1
    sigma: float = 1.0
    coeffs: Sequence[float] | Callable[[int], float] = ()
    tau: float = 2.0
    radius: float = 1.0
    p_max: int = 60
    coeff_check_index: int = 200
    degree: int = 1
    q: float = 2.0
    k_max: int = spline.DEFAULT_K_MAX
    spline_method: str = "auto"
    gamma_hom: float = 1.0
    sampler: Callable[..., np.ndarray] | None = None
    total_mass: float = 1.0
    kernel_fn: Callable[..., np.ndarray] | None = None
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not isinstance(self.coeffs, Callable):
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        _validate(self)

    # -- convenience constructors ------------------------------------------
    @classmethod
    def rff(cls, sigma=1.0, dim=1):
        return cls(Family.RFF, dim=dim, sigma=sigma)

    @classmethod
    def gaussian_taylor(cls, sigma=1.0, dim=1):
        return cls(Family.GAUSSIAN_TAYLOR, dim=dim, sigma=sigma)

    @classmethod
    def dot_product(cls, coeffs, tau=2.0, radius=1.0, dim=1, p_max=60):
        return cls(Family.DOT_PRODUCT, dim=dim, coeffs=coeffs, tau=tau, radius=radius, p_max=p_max)

    @classmethod
    def arc_cosine(cls, degree=1, dim=1):
        return cls(Family.ARC_COSINE, dim=dim, degree=degree)

    @classmethod
    def sign_sketch(cls, dim=1):
        return cls(Family.SIGN_SKETCH, dim=dim)

    @classmethod
    def linear_sketch(cls, dim=1):
        return cls(Family.LINEAR_SKETCH, dim=dim)

    @classmethod
    def laplace_semigroup(cls, dim=1, sampler=None, total_mass=1.0, kernel_fn=None):
        return cls(Family.LAPLACE_SEMIGROUP, dim=dim, sampler=sampler, total_mass=total_mass,
                   kernel_fn=kernel_fn)

    @classmethod
    def homogeneous_additive(cls, dim=1, gamma_hom=1.0, sampler=None, total_mass=1.0,
                             kernel_fn=None):
        return cls(Family.HOMOGENEOUS_ADDITIVE, dim=dim, gamma_hom=gamma_hom, sampler=sampler,
                   total_mass=total_mass, kernel_fn=kernel_fn)

    @classmethod
    def spline(cls, q=2.0, k_max=spline.DEFAULT_K_MAX, method="auto"):
        return cls(Family.SPLINE, dim=1, q=q, k_max=k_max, spline_method=method)

    # -- derived quantities -------------------------------------------------
    def coeff(self, p: int) -> float:
        if callable(self.coeffs):
            return float(self.coeffs(p))
        return self.coeffs[p] if p < len(self.coeffs) else 0.0

    @property
    def coeff_count(self) -> int:
        """Number of dot-product coefficients summed by the exact kernel."""
        if callable(self.coeffs):
            return self.coeff_check_index + 1
        return len(self.coeffs)

    @property
    def psi_order(self) -> float:
        """Order of the spline used as feature, half the kernel order."""
        return self.q / 2.0

    @property
    def bound(self) -> float:
        """Uniform bound ``kappa`` on ``|psi|`` where one exists (inf otherwise)."""
        f = self.family
        if f == Family.RFF:
            return np.sqrt(2.0)
        if f == Family.SIGN_SKETCH:
            return 1.0
        if f == Family.SPLINE:
            return spline.spline_diagonal(self.psi_order)
        if f == Family.GAUSSIAN_TAYLOR:
            return float(np.exp(0.5 * self.sigma**2 * self.dim))
        if f == Family.LAPLACE_SEMIGROUP:
            return float(np.sqrt(self.total_mass))
        return float("inf")


def _validate(spec: FeatureMapSpec) -> None:
    f = spec.family
    if int(spec.dim) < 1:
        raise ConfigurationError("dim must be a positive integer")
    if f in (Family.RFF, Family.GAUSSIAN_TAYLOR) and not spec.sigma > 0:
        raise ConfigurationError("sigma must be strictly positive")
    if f == Family.DOT_PRODUCT:
        if not spec.tau > 1:
            raise ConfigurationError("tau must exceed 1")
        if not spec.radius > 0:
            raise ConfigurationError("radius must be strictly positive")
        if spec.p_max < 0:
            raise ConfigurationError("p_max must be nonnegative")
        terms = np.array([spec.coeff(p) for p in range(spec.coeff_count)], dtype=float)
        if terms.size == 0 or np.any(terms < 0) or not np.all(np.isfinite(terms)):
            raise ConfigurationError("dot-product coefficients must be a nonempty nonnegative sequence")
        # v(tau R^2 d) must be finite: the tail of the partial sums has to vanish.
        arg = spec.tau * spec.radius**2 * spec.dim
        with np.errstate(over="ignore"):
            series = terms * arg ** np.arange(terms.size)
        total = series.sum()
        if not np.isfinite(total) or (callable(spec.coeffs) and series[-1] > 1e-12 * max(total, 1.0)):
            raise ConfigurationError("dot-product series v(tau R^2 d) does not converge")
    if f == Family.ARC_COSINE and (int(spec.degree) != spec.degree or spec.degree < 0):
        raise ConfigurationError("arc-cosine degree must be a nonnegative integer")
    if f == Family.SPLINE:
        if not spec.q > 1:
            raise ConfigurationError("spline order q must exceed 1")
        if spec.dim != 1:
            raise ConfigurationError("spline features are one-dimensional")
        if spec.k_max < 1:
            raise ConfigurationError("k_max must be a positive integer")
        if spec.spline_method not in ("auto", "series", "closed"):
            raise ConfigurationError(f"unknown spline method {spec.spline_method!r}")
    if f in (Family.LAPLACE_SEMIGROUP, Family.HOMOGENEOUS_ADDITIVE) and not spec.total_mass > 0:
        raise ConfigurationError("total_mass must be strictly positive")


# ---------------------------------------------------------------------------
# Frequencies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Frequencies:
    """A batch of ``M`` frequencies stored as arrays with leading axis ``M``.

    Payload keys per family: RFF ``w, b``; GaussianTaylor ``alpha``;
    DotProduct ``degree, signs``; ArcCosine/SignSketch/LinearSketch ``w``;
    LaplaceSemigroup ``omega``; HomogeneousAdditive ``w, b`` (one pair per
    coordinate); Spline ``omega``.
    """

    family: Family
    arrays: Mapping[str, np.ndarray]

    def __len__(self) -> int:
        return len(next(iter(self.arrays.values())))

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            idx = [int(idx)]
        return self.take(idx)

    def take(self, idx) -> "Frequencies":
        idx = np.asarray(idx)
        return Frequencies(self.family, {k: v[idx] for k, v in self.arrays.items()})

    @classmethod
    def concat(cls, parts: Sequence["Frequencies"]) -> "Frequencies":
        family = parts[0].family
        keys = parts[0].arrays.keys()
        out = {}
        for key in keys:
            arrs = [p.arrays[key] for p in parts]
            if key == "signs":
                width = max(a.shape[1] for a in arrs)
                arrs = [np.pad(a, ((0, 0), (0, width - a.shape[1]), (0, 0))) for a in arrs]
            out[key] = np.concatenate(arrs, axis=0)
        return cls(family, out)


@dataclass(frozen=True)
class SampledFeatures:
    """Drawn frequencies with per-feature importance weights."""

    spec: FeatureMapSpec
    omegas: Frequencies
    weights: np.ndarray
    seed: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if len(self.omegas) < 1:
            raise DomainError("need at least one feature")
        if w.shape != (len(self.omegas),):
            raise DomainError("weights must match the number of frequencies")
        if not np.all(w > 0):
            raise DomainError("importance weights must be strictly positive")
        if self.omegas.family != self.spec.family:
            raise DomainError("frequency payload does not match the feature family")

    @property
    def M(self) -> int:
        return len(self.omegas)


def _draw_block(spec: FeatureMapSpec, rng: np.random.Generator, m: int) -> Frequencies:
    f, d = spec.family, spec.dim
    if f == Family.RFF:
        w = rng.standard_normal((m, d)) / spec.sigma
        b = rng.uniform(0.0, 2.0 * pi, size=m)
        return Frequencies(f, {"w": w, "b": b})
    if f == Family.GAUSSIAN_TAYLOR:
        total = rng.poisson(spec.sigma**2 * d, size=m)
        alpha = rng.multinomial(total, np.full(d, 1.0 / d))
        return Frequencies(f, {"alpha": alpha.reshape(m, d)})
    if f == Family.DOT_PRODUCT:
        # P(p) = (tau - 1) tau^{-p-1}: geometric with success 1 - 1/tau, shifted to start at 0.
        degree = rng.geometric(1.0 - 1.0 / spec.tau, size=m) - 1
        bad = degree > spec.p_max
        while np.any(bad):
            degree[bad] = rng.geometric(1.0 - 1.0 / spec.tau, size=int(bad.sum())) - 1
            bad = degree > spec.p_max
        width = max(int(degree.max()), 1)
        signs = rng.choice(np.array([-1, 1], dtype=np.int8), size=(m, width, d))
        return Frequencies(f, {"degree": degree, "signs": signs})
    if f in (Family.ARC_COSINE, Family.SIGN_SKETCH, Family.LINEAR_SKETCH):
        return Frequencies(f, {"w": rng.standard_normal((m, d))})
    if f == Family.LAPLACE_SEMIGROUP:
        sampler = spec.sampler or _exponential_sampler
        omega = np.asarray(sampler(rng, m, d), dtype=float).reshape(m, d)
        if np.any(omega < 0):
            raise ConfigurationError("Laplace sampler must return nonnegative frequencies")
        return Frequencies(f, {"omega": omega})
    if f == Family.HOMOGENEOUS_ADDITIVE:
        sampler = spec.sampler or _hyperbolic_secant_sampler
        w = np.asarray(sampler(rng, m, d), dtype=float).reshape(m, d)
        b = rng.uniform(0.0, 2.0 * pi, size=(m, d))
        return Frequencies(f, {"w": w, "b": b})
    if f == Family.SPLINE:
        return Frequencies(f, {"omega": rng.random(m)})
    raise CapabilityError(f"sampling not implemented for {f}")


def sample_features(spec: FeatureMapSpec, M: int, seed: int) -> SampledFeatures:
    """Draw ``M`` i.i.d. frequencies from the family's law.

    Pure in ``(spec, M, seed)``; the draws for ``M`` are a prefix of the
    draws for any larger ``M``.
    """
    if int(M) != M or M < 1:
        raise DomainError(f"M must be a positive integer, got {M}")
    M = int(M)
    blocks = []
    for j in range(-(-M // BLOCK_SIZE)):
        blocks.append(_draw_block(spec, rng_for(seed, "features", j), BLOCK_SIZE))
    omegas = Frequencies.concat(blocks).take(np.arange(M))
    return SampledFeatures(spec, omegas, np.ones(M), seed)


def coordinate_features(dim: int) -> SampledFeatures:
    """Deterministic linear-sketch features with ``phi(x) = x`` exactly.

    Uses ``omega_j = sqrt(dim) e_j`` so that the ``1/sqrt(M)`` scaling cancels.
    """
    spec = FeatureMapSpec.linear_sketch(dim=dim)
    w = np.sqrt(dim) * np.eye(dim)
    return SampledFeatures(spec, Frequencies(Family.LINEAR_SKETCH, {"w": w}), np.ones(dim), 0)


# ---------------------------------------------------------------------------
# Feature evaluation
# ---------------------------------------------------------------------------


def _as_points(spec: FeatureMapSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, spec.dim) if spec.dim > 1 or X.size != 1 else X.reshape(1, 1)
        if spec.dim == 1:
            X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != spec.dim:
        raise DomainError(f"expected points of dimension {spec.dim}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DomainError("points must be finite")
    _check_domain(spec, X)
    return X


def _check_domain(spec: FeatureMapSpec, X: np.ndarray) -> None:
    f = spec.family
    if f == Family.DOT_PRODUCT:
        if np.any(np.linalg.norm(X, axis=1) > spec.radius * (1 + _DOMAIN_TOL)):
            raise DomainError(f"dot-product features need |x| <= {spec.radius}")
    elif f in (Family.LAPLACE_SEMIGROUP, Family.HOMOGENEOUS_ADDITIVE):
        if np.any(X < 0):
            raise DomainError("inputs must be coordinatewise nonnegative")
    elif f in (Family.SPLINE, Family.GAUSSIAN_TAYLOR):
        if np.any(X < -_DOMAIN_TOL) or np.any(X > 1 + _DOMAIN_TOL):
            raise DomainError("inputs must lie in [0, 1]")


def _dot_truncated_law(spec: FeatureMapSpec, degree):
    # Degree law conditioned on p <= p_max.
    mass = 1.0 - spec.tau ** (-(spec.p_max + 1.0))
    return (spec.tau - 1.0) * spec.tau ** (-(np.asarray(degree, dtype=float) + 1.0)) / mass


def psi_matrix(spec: FeatureMapSpec, omegas: Frequencies, X) -> np.ndarray:
    """Raw ``psi(x_i, omega_j)`` as an ``n x M`` matrix (no weights, no scaling)."""
    X = _as_points(spec, X)
    if omegas.family != spec.family:
        raise DomainError("frequency payload does not match the feature family")
    a = omegas.arrays
    f = spec.family
    if f == Family.RFF:
        return np.sqrt(2.0) * np.cos(X @ a["w"].T + a["b"])
    if f == Family.GAUSSIAN_TAYLOR:
        alpha = a["alpha"]
        scale = np.exp(0.5 * spec.sigma**2 * spec.dim - 0.5 * spec.sigma**2 * np.sum(X**2, axis=1))
        monomials = np.prod(X[:, None, :] ** alpha[None, :, :], axis=2)
        return scale[:, None] * monomials
    if f == Family.DOT_PRODUCT:
        degree, signs = a["degree"], a["signs"].astype(float)
        proj = np.einsum("mpd,nd->nmp", signs, X)
        active = np.arange(signs.shape[1])[None, :] < degree[:, None]
        proj = np.where(active[None, :, :], proj, 1.0)
        coef = np.array([spec.coeff(int(p)) for p in degree])
        amp = np.sqrt(coef / _dot_truncated_law(spec, degree))
        return amp[None, :] * np.prod(proj, axis=2)
    if f == Family.ARC_COSINE:
        z = X @ a["w"].T
        if spec.degree == 0:
            return (z > 0).astype(float)
        return np.where(z > 0, z, 0.0) ** int(spec.degree)
    if f == Family.SIGN_SKETCH:
        return np.where(X @ a["w"].T > 0, 1.0, -1.0)
    if f == Family.LINEAR_SKETCH:
        return X @ a["w"].T
    if f == Family.LAPLACE_SEMIGROUP:
        return np.sqrt(spec.total_mass) * np.exp(-(X @ a["omega"].T))
    if f == Family.HOMOGENEOUS_ADDITIVE:
        # Scalar sum over coordinates; cross terms vanish in expectation because
        # each phase b_i is uniform and independent.
        w, b = a["w"], a["b"]
        pos = X > 0
        logx = np.log(np.where(pos, X, 1.0))
        mag = np.where(pos, X, 0.0) ** (0.5 * spec.gamma_hom)
        terms = mag[:, None, :] * np.cos(w[None, :, :] * logx[:, None, :] + b[None, :, :])
        return np.sqrt(2.0 * spec.total_mass) * terms.sum(axis=2)
    if f == Family.SPLINE:
        delta = a["omega"][None, :] - X[:, 0][:, None]
        return spline.spline_kernel(delta, spec.psi_order, spec.k_max, spec.spline_method, overwrite_input=True)
    raise CapabilityError(f"psi not implemented for {f}")


def psi(spec: FeatureMapSpec, omega: Frequencies, x) -> float:
    """Scalar feature value for a single frequency and a single point."""
    if len(omega) != 1:
        raise DomainError("psi takes exactly one frequency")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(psi_matrix(spec, omega, x)[0, 0])


def feature_matrix(sf: SampledFeatures, X) -> np.ndarray:
    """Unscaled-by-n feature matrix ``A[i, j] = weight_j psi(x_i, omega_j) / sqrt(M)``."""
    A = psi_matrix(sf.spec, sf.omegas, X)
    A *= (sf.weights / np.sqrt(sf.M))[None, :]
    if not np.all(np.isfinite(A)):
        raise DomainError("feature matrix has non-finite entries")
    return A


# ---------------------------------------------------------------------------
# Exact kernels
# ---------------------------------------------------------------------------


def _angles(X, Z):
    nx = np.linalg.norm(X, axis=1)
    nz = np.linalg.norm(Z, axis=1)
    denom = np.outer(nx, nz)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0, (X @ Z.T) / np.where(denom > 0, denom, 1.0), 1.0)
    return nx, nz, np.arccos(np.clip(cos, -1.0, 1.0)), denom > 0


def _arccos_J(p: int, theta):
    if p == 0:
        return pi - theta
    if p == 1:
        return np.sin(theta) + (pi - theta) * np.cos(theta)
    if p == 2:
        return 3.0 * np.sin(theta) * np.cos(theta) + (pi - theta) * (1.0 + 2.0 * np.cos(theta) ** 2)
    raise CapabilityError(f"arc-cosine closed form available for degree <= 2, got {p}")


def kernel_matrix(spec: FeatureMapSpec, X, Z=None) -> np.ndarray:
    """Exact kernel ``K(x_i, z_j)`` for all pairs."""
    X = _as_points(spec, X)
    Z = X if Z is None else _as_points(spec, Z)
    f = spec.family
    if f in (Family.RFF, Family.GAUSSIAN_TAYLOR):
        sq = np.sum(X**2, 1)[:, None] + np.sum(Z**2, 1)[None, :] - 2.0 * X @ Z.T
        sq = np.maximum(sq, 0.0)
        if f == Family.RFF:
            return np.exp(-sq / (2.0 * spec.sigma**2))
        return np.exp(-0.5 * spec.sigma**2 * sq)
    if f == Family.DOT_PRODUCT:
        G = X @ Z.T
        out = np.zeros_like(G)
        for p in reversed(range(spec.coeff_count)):
            out = out * G + spec.coeff(p)
        return out
    if f == Family.ARC_COSINE:
        p = int(spec.degree)
        nx, nz, theta, ok = _angles(X, Z)
        K = ARCCOS_CONSTANT * np.outer(nx**p, nz**p) * _arccos_J(p, theta)
        return np.where(ok, K, 0.0)
    if f == Family.SIGN_SKETCH:
        nx, nz, theta, ok = _angles(X, Z)
        K = 1.0 - 2.0 * theta / pi
        # sign(0) = -1, so a zero input has the constant feature -1.
        both_zero = np.outer(nx == 0, nz == 0)
        return np.where(ok, K, np.where(both_zero, 1.0, 0.0))
    if f == Family.LINEAR_SKETCH:
        return X @ Z.T
    if f == Family.LAPLACE_SEMIGROUP:
        if spec.kernel_fn is None:
            if spec.sampler is not None:
                raise CapabilityError("custom Laplace sampler without kernel_fn has no closed form")
            fn = _laplace_default_kernel
        else:
            fn = spec.kernel_fn
        return np.asarray(fn(X[:, None, :] + Z[None, :, :]), dtype=float)
    if f == Family.HOMOGENEOUS_ADDITIVE:
        if spec.kernel_fn is None:
            if spec.sampler is not None:
                raise CapabilityError("custom spectral sampler without kernel_fn has no closed form")
            fn = _chi2_kernel
        else:
            fn = spec.kernel_fn
        return np.asarray(fn(X[:, None, :], Z[None, :, :]), dtype=float).sum(axis=2)
    if f == Family.SPLINE:
        delta = X[:, 0][:, None] - Z[:, 0][None, :]
        return spline.spline_kernel(delta, spec.q, spec.k_max, spec.spline_method)
    raise CapabilityError(f"no exact kernel for {f}")


def exact_kernel(spec: FeatureMapSpec, x, x_prime) -> float:
    """Scalar ``K(x, x')``."""
    return float(kernel_matrix(spec, np.reshape(x, (1, -1)), np.reshape(x_prime, (1, -1)))[0, 0])


def kernel_bias_bound(spec: FeatureMapSpec) -> float:
    """Worst-case gap between ``E[psi psi]`` and the exact kernel evaluator.

    Spline: series truncation tail. DotProduct: degrees above ``p_max``
    are never sampled, so their mass ``sum_{p > p_max} c_p R^{2p}`` is lost.
    """
    if spec.family == Family.SPLINE:
        return spline.spline_error_bound(spec.q, spec.k_max, spec.spline_method)
    if spec.family == Family.DOT_PRODUCT:
        return float(sum(spec.coeff(p) * spec.radius ** (2 * p)
                         for p in range(spec.p_max + 1, spec.coeff_count)))
    return 0.0


def sample_domain(spec: FeatureMapSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random points inside the family's input domain."""
    X = rng.random((n, spec.dim))
    if spec.family == Family.DOT_PRODUCT:
        X = (2.0 * X - 1.0) * spec.radius / np.sqrt(spec.dim)
    return X


def approx_error_report(spec: FeatureMapSpec, M_list: Sequence[int], n_pairs: int, seed: int,
                        pairs=None) -> list[tuple[int, float, float]]:
    """Kernel approximation error ``|phi_M(x)^T phi_M(x') - K(x, x')|`` per ``M``.

    Returns rows ``(M, mean_abs_error, max_abs_error)`` over ``n_pairs``
    random pairs (or the given ``pairs = (X, X')``).
    """
    if pairs is None:
        rng = rng_for(seed, "pairs")
        X = sample_domain(spec, n_pairs, rng)
        Xp = sample_domain(spec, n_pairs, rng)
    else:
        X, Xp = (np.asarray(p, dtype=float) for p in pairs)
    exact = np.array([kernel_matrix(spec, X[i:i + 1], Xp[i:i + 1])[0, 0] for i in range(len(X))])
    rows = []
    for M in M_list:
        sf = sample_features(spec, M, derive_seed(seed, "approx"))
        approx = np.sum(feature_matrix(sf, X) * feature_matrix(sf, Xp), axis=1)
        err = np.abs(approx - exact)
        rows.append((int(M), float(err.mean()), float(err.max())))
    return rows
