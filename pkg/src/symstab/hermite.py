"""Hermite polynomials normalized by the generating function.

``exp(lam*x - lam^2/2) = sum_l lam^l h_l(x)``, so ``h_l = He_l / l!`` where
``He_l`` are the probabilists' polynomials. ``sqrt(l!) h_l`` is orthonormal in
``L2(gamma_1)``. Multi-indices are plain tuples of nonnegative ints.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "MAX_DEGREE",
    "ExponentialTilt",
    "degree",
    "multi_factorial",
    "multi_indices",
    "hermite_1d",
    "hermite_1d_explicit",
    "hermite_table",
    "hermite_nd",
    "hermite_norm",
    "hermite_growth_bound",
    "hermite_interval_integral",
    "hermite_monomial_coefficients",
    "gaussian_density",
]

MAX_DEGREE = 60


@dataclass(frozen=True)
class ExponentialTilt:
    """``f(x) = exp(lam*x - lam^2/2)``; its coefficients are ``lam^l / sqrt(l!)``."""

    lam: float

    def __post_init__(self):
        if not np.isfinite(self.lam):
            raise ValueError("lambda must be finite")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(self.lam * x - self.lam**2 / 2)

    def coefficient(self, ell: int) -> float:
        return self.lam**ell / math.sqrt(math.factorial(ell))


def gaussian_density(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def _check_index(ell) -> tuple[int, ...]:
    ell = tuple(int(e) for e in np.atleast_1d(ell))
    if any(e < 0 for e in ell):
        raise ValueError(f"multi-index entries must be nonnegative, got {ell}")
    return ell


def degree(ell) -> int:
    return sum(_check_index(ell))


def multi_factorial(ell) -> int:
    """``l! = prod_i l_i!`` as an exact integer."""
    out = 1
    for e in _check_index(ell):
        out *= math.factorial(e)
    return out


def multi_indices(n: int, max_degree: int):
    """All ``l`` in ``N^n`` with ``|l|_1 <= max_degree``, ordered by degree."""
    out = []
    for k in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), k):
            ell = [0] * n
            for i in combo:
                ell[i] += 1
            out.append(tuple(ell))
    return out


def hermite_table(max_degree: int, x) -> np.ndarray:
    """``h_0(x), ..., h_L(x)`` stacked on a new leading axis.

    Uses ``(l+1) h_{l+1} = x h_l - h_{l-1}``.
    """
    if max_degree > MAX_DEGREE:
        raise ValueError(f"degree {max_degree} exceeds cap {MAX_DEGREE}")
    x = np.asarray(x, dtype=float)
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = x
    for ell in range(1, max_degree):
        out[ell + 1] = (x * out[ell] - out[ell - 1]) / (ell + 1)
    return out


def hermite_1d(ell: int, x):
    if ell < 0:
        raise ValueError("ell must be >= 0")
    val = hermite_table(ell, x)[ell]
    return float(val) if np.ndim(val) == 0 else val


def hermite_1d_explicit(ell: int, x):
    """``h_l(x) = sum_m x^{l-2m} (-1)^m 2^{-m} / (m! (l-2m)!)``, summed directly."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for m in range(ell // 2 + 1):
        c = (-1) ** m / (2.0**m * math.factorial(m) * math.factorial(ell - 2 * m))
        total = total + c * x ** (ell - 2 * m)
    return float(total) if total.ndim == 0 else total


@lru_cache(maxsize=None)
def hermite_monomial_coefficients(ell: int) -> tuple[Fraction, ...]:
    """Exact power-basis coefficients ``c_k`` with ``h_l(x) = sum_k c_k x^k``."""
    coeffs = [Fraction(0)] * (ell + 1)
    for m in range(ell // 2 + 1):
        coeffs[ell - 2 * m] = Fraction((-1) ** m, 2**m * math.factorial(m) * math.factorial(ell - 2 * m))
    return tuple(coeffs)


def hermite_nd(ell, x):
    """``h_l(x) = prod_i h_{l_i}(x_i)``; ``x`` has trailing axis of length ``n``."""
    ell = _check_index(ell)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != len(ell):
        raise ValueError(f"point dimension {x.shape[-1]} != multi-index length {len(ell)}")
    out = np.ones(x.shape[:-1])
    for i, e in enumerate(ell):
        if e:
            out = out * hermite_table(e, x[..., i])[e]
    return float(out) if out.ndim == 0 else out


def hermite_norm(ell) -> float:
    """``int h_l^2 dgamma_n = 1 / l!``."""
    return 1.0 / multi_factorial(ell)


def hermite_growth_bound(ell, x):
    """Dominating function for ``|sqrt(l!) h_l(x)|``.

    ``|l|^n 3^{|l|} prod_i max(1, |x_i|^{l_i})``, floored at 1 so the
    ``l = 0`` case (where the prefactor vanishes) still dominates ``h_0 = 1``.
    """
    ell = _check_index(ell)
    x = np.asarray(x, dtype=float)
    n = len(ell)
    k = sum(ell)
    prod = np.ones(x.shape[:-1])
    for i, e in enumerate(ell):
        prod = prod * np.maximum(1.0, np.abs(x[..., i]) ** e)
    out = np.maximum(1.0, float(k) ** n * 3.0**k * prod)
    return float(out) if out.ndim == 0 else out


def hermite_interval_integral(ell: int, c: float, d: float) -> float:
    """Exact ``int_c^d h_l dgamma_1`` for ``l >= 1``; endpoints may be infinite.

    From ``h_l phi = (-1)^l phi^{(l)} / l!`` the antiderivative is
    ``-h_{l-1} phi / l``.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1; use the interval's measure for ell = 0")
    if c > d:
        raise ValueError("need c <= d")

    def prim(t):
        if np.isinf(t):
            return 0.0
        return -hermite_1d(ell - 1, t) * float(gaussian_density(t)) / ell

    return prim(d) - prim(c)
