"""Periodic spline kernels on [0, 1].

``Lambda_q(x, x') = sum_{k != 0} |k|^{-q} exp(2 pi i k (x - x'))
                  = 2 sum_{k >= 1} k^{-q} cos(2 pi k (x - x'))``

The eigenvalues of the associated integral operator under the uniform
measure are ``|k|^{-q}``, and ``Lambda_q * Lambda_q' = Lambda_{q + q'}``.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, pi

import numpy as np
from scipy.special import zeta

from .errors import DomainError

DEFAULT_K_MAX = 10_000

# Entries of the (points x frequencies) cosine block evaluated per chunk.
_CHUNK_ENTRIES = 2_000_000


def _is_even_integer(q: float) -> bool:
    return float(q).is_integer() and int(q) % 2 == 0 and q > 0


def has_closed_form(q: float) -> bool:
    """True when ``Lambda_q`` is available without truncation (q = 1 or even q)."""
    return q == 1 or _is_even_integer(q)


@lru_cache(maxsize=None)
def bernoulli_numbers(order: int) -> tuple[Fraction, ...]:
    """Exact ``B_0 .. B_order`` (convention ``B_1 = -1/2``).

    Rational arithmetic: the float tables in scipy are off by up to ~1e-13.
    """
    out = [Fraction(1)]
    for n in range(1, order + 1):
        out.append(-sum(comb(n + 1, k) * out[k] for k in range(n)) / (n + 1))
    return tuple(out)


def bernoulli_polynomial(order: int, x):
    """Bernoulli polynomial ``B_order(x)`` evaluated by Horner's rule."""
    numbers = bernoulli_numbers(order)
    # B_n(x) = sum_k C(n, k) B_k x^{n-k}; highest power first for Horner.
    coeffs = [float(comb(order, k) * numbers[k]) for k in range(order + 1)]
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c in coeffs:
        out = out * x + c
    return out


def _bernoulli_about_half(order: int, s2: np.ndarray) -> np.ndarray:
    """``B_order(1/2 + s)`` for even ``order``, as a polynomial in ``s2 = s^2``.

    Expanding about the midpoint avoids the cancellation of the monomial
    form near the period ends. ``s2`` is overwritten by the result.
    """
    numbers = bernoulli_numbers(order)
    # B_n(1/2 + s) = sum_k C(n, k) B_k(1/2) s^{n-k},  B_k(1/2) = (2^{1-k} - 1) B_k.
    coeffs = [float(comb(order, k) * (Fraction(2) ** (1 - k) - 1) * numbers[k]) for k in range(0, order + 1, 2)]
    out = s2 * coeffs[0]
    out += coeffs[1]
    for c in coeffs[2:]:
        out *= s2
        out += c
    return out


def spline_closed_form(delta, q: float, overwrite_input: bool = False):
    """Exact ``Lambda_q(delta)`` for ``q = 1`` or ``q`` an even positive integer.

    Even orders use ``sum_{k>=1} cos(2 pi k t)/k^{2m} =
    (-1)^{m+1} (2 pi)^{2m} B_{2m}(t) / (2 (2m)!)`` on ``t in [0, 1)``;
    order one uses ``-2 log(2 sin(pi t))`` (infinite at ``t = 0``).
    With ``overwrite_input`` a float array ``delta`` is used as scratch space.
    """
    u = np.asarray(delta, dtype=float) if overwrite_input else np.array(delta, dtype=float)
    u -= np.rint(u)
    np.abs(u, out=u)  # distance to the nearest integer, exactly even in delta
    if q == 1:
        with np.errstate(divide="ignore"):
            return -2.0 * np.log(2.0 * np.sin(pi * u))
    if not _is_even_integer(q):
        raise DomainError(f"no closed form for spline order {q}")
    m = int(q) // 2
    scale = (-1) ** (m + 1) * (2.0 * pi) ** (2 * m) / factorial(2 * m)
    np.subtract(0.5, u, out=u)
    u *= u
    out = _bernoulli_about_half(2 * m, u)
    out *= scale
    return out


def spline_series(delta, q: float, k_max: int = DEFAULT_K_MAX):
    """Truncated series ``2 sum_{k=1}^{k_max} k^{-q} cos(2 pi k delta)``."""
    d = np.asarray(delta, dtype=float)
    flat = np.mod(d.ravel(), 1.0)
    out = np.zeros(flat.shape)
    if flat.size == 0:
        return out.reshape(d.shape)
    step = max(1, _CHUNK_ENTRIES // flat.size)
    for start in range(1, k_max + 1, step):
        k = np.arange(start, min(start + step, k_max + 1), dtype=float)
        out += np.cos(2.0 * pi * np.outer(flat, k)) @ (k ** (-float(q)))
    return (2.0 * out).reshape(d.shape)


def spline_tail_bound(q: float, k_max: int) -> float:
    """Bound on ``|Lambda_q - series_{k_max}|``: ``2 k_max^{1-q} / (q - 1)``."""
    if q <= 1:
        return float("inf")
    return 2.0 * float(k_max) ** (1.0 - q) / (q - 1.0)


def spline_kernel(delta, q: float, k_max: int = DEFAULT_K_MAX, method: str = "auto",
                  overwrite_input: bool = False):
    """Evaluate ``Lambda_q`` at the offset ``delta = x - x'``.

    ``method`` is ``"auto"`` (closed form when available, else series),
    ``"series"`` or ``"closed"``.
    """
    if method == "closed" or (method == "auto" and has_closed_form(q)):
        return spline_closed_form(delta, q, overwrite_input)
    if method not in ("auto", "series"):
        raise DomainError(f"unknown spline evaluation method {method!r}")
    return spline_series(delta, q, k_max)


def spline_error_bound(q: float, k_max: int = DEFAULT_K_MAX, method: str = "auto") -> float:
    if method == "closed" or (method == "auto" and has_closed_form(q)):
        return 0.0
    return spline_tail_bound(q, k_max)


def spline_diagonal(q: float) -> float:
    """``Lambda_q(x, x) = 2 zeta(q)``."""
    if q <= 1:
        return float("inf")
    return 2.0 * float(zeta(q))


def spline_eigenvalues(q: float, k_max: int):
    """Operator eigenvalues ``|k|^{-q}`` for ``k = 1..k_max`` (each has multiplicity two)."""
    k = np.arange(1, k_max + 1, dtype=float)
    return k ** (-float(q))


def spline_effective_dimension(lam: float, q: float, k_max: int = DEFAULT_K_MAX) -> float:
    """Population ``N(lam) = sum_{k != 0} mu_k / (mu_k + lam)`` with ``mu_k = |k|^{-q}``."""
    mu = spline_eigenvalues(q, k_max)
    return float(2.0 * np.sum(mu / (mu + lam)))
