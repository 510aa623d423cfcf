"""Gaussian measures of centered balls and related closed forms.

Everything here is radial: the standard Gaussian measure of ``B(0, r)`` in
``R^n`` is the chi-square CDF ``P(n/2, r^2/2)``, and the other quantities
(sphere volumes, Wallis integrals, the second-moment defect of a ball) are
closed forms built from it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

__all__ = [
    "BallSpec",
    "ScaledRadius",
    "GammaExpansionBounds",
    "EdgeworthTerms",
    "gaussian_measure_ball",
    "radius_for_measure",
    "sphere_volume",
    "sphere_volume_wallis",
    "log_sphere_volume",
    "wallis_integral",
    "double_factorial",
    "second_moment_defect_ball",
    "log_second_moment_defect_ball",
    "gamma_expansion_bounds",
    "gamma_half_expansion",
    "edgeworth_ball_measure",
]


@dataclass(frozen=True)
class BallSpec:
    """Centered ball ``B(0, radius)`` in ``R^dim``."""

    dim: int
    radius: float

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        if not np.isfinite(self.radius) or self.radius < 0:
            raise ValueError(f"radius must be finite and >= 0, got {self.radius!r}")


@dataclass(frozen=True)
class ScaledRadius:
    """Radius ``sqrt(n + s*sqrt(2n))``, the CLT scaling of a chi-square ball."""

    s: float
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        if self.dim + self.s * math.sqrt(2 * self.dim) < 0:
            raise ValueError(f"n + s*sqrt(2n) < 0 for s={self.s}, n={self.dim}")

    @property
    def radius(self) -> float:
        return math.sqrt(self.dim + self.s * math.sqrt(2 * self.dim))


@dataclass(frozen=True)
class GammaExpansionBounds:
    m: float
    lambda_lower: float
    lambda_upper: float


@dataclass(frozen=True)
class EdgeworthTerms:
    exact: float
    clt_term: float
    correction_term: float


def _clamp01(p):
    return float(min(1.0, max(0.0, p)))


def gaussian_measure_ball(spec: BallSpec) -> float:
    """Standard Gaussian measure of ``B(0, r)`` in ``R^n``."""
    if spec.radius == 0:
        return 0.0
    return _clamp01(special.gammainc(spec.dim / 2.0, spec.radius**2 / 2.0))


def radius_for_measure(n: int, a: float) -> float:
    """Radius ``r`` with ``gamma_n(B(0, r)) = a``.

    Inverse regularized gamma for the starting point, then Newton steps on the
    measure (whose derivative is the radial density), guarded by a bracket.
    """
    if not 0.0 < a < 1.0:
        raise ValueError(f"measure must lie in (0, 1), got {a!r}")
    BallSpec(n, 0.0)
    r = math.sqrt(2.0 * special.gammaincinv(n / 2.0, a))
    lo, hi = 0.0, max(2 * r, 1.0)
    while gaussian_measure_ball(BallSpec(n, hi)) < a:
        hi *= 2
    for _ in range(50):
        g = special.gammainc(n / 2.0, r * r / 2.0) - a
        if abs(g) <= 1e-15:
            break
        if g > 0:
            hi = min(hi, r)
        else:
            lo = max(lo, r)
        r_new = r - g / _radial_density(n, r) if r > 0 else -1.0
        if not (lo < r_new < hi):
            r_new = 0.5 * (lo + hi)
        if abs(r_new - r) <= 1e-15 * max(1.0, r):
            r = r_new
            break
        r = r_new
    return r


def _radial_density(n: int, r: float) -> float:
    # d/dr gamma_n(B(0, r))
    return math.exp(log_sphere_volume(n) + (n - 1) * math.log(r) - r * r / 2
                    - 0.5 * n * math.log(2 * math.pi))


def log_sphere_volume(n: int) -> float:
    """``log Vol(S^{n-1})`` via ``2 pi^{n/2} / Gamma(n/2)``."""
    return math.log(2.0) + 0.5 * n * math.log(math.pi) - special.gammaln(n / 2.0)


def sphere_volume(n: int) -> float:
    """Surface measure of the unit sphere ``S^{n-1}`` in ``R^n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * math.pi ** (n / 2.0) / special.gamma(n / 2.0)


def sphere_volume_wallis(n: int) -> float:
    """Same as :func:`sphere_volume`, as ``2 pi * prod_{k=1}^{n-2} W_k``.

    ``W_k`` is the Wallis integral. For ``n = 1`` the "sphere" is two points.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 2.0
    out = 2.0 * math.pi
    for k in range(1, n - 1):
        out *= wallis_integral(k)
    return out


def double_factorial(k: int) -> int:
    """``k!!`` with ``0!! = (-1)!! = 1``."""
    if k < -1:
        raise ValueError("k must be >= -1")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def wallis_integral(k: int) -> float:
    """``int_0^pi sin^k(theta) dtheta`` by the double-factorial formula."""
    if k < 0:
        raise ValueError("k must be >= 0")
    # exact rational ratio before the single float conversion
    ratio = double_factorial(k - 1) / double_factorial(k)
    return (math.pi if k % 2 == 0 else 2.0) * ratio


def log_second_moment_defect_ball(n: int, r: float) -> float:
    if r <= 0:
        return -np.inf
    return (log_sphere_volume(n) + n * math.log(r) - r * r / 2
            - math.log(n) - 0.5 * n * math.log(2 * math.pi))


def second_moment_defect_ball(spec: BallSpec) -> float:
    """``int_{B(0,r)} (1 - x_1^2) dgamma_n``.

    Closed form ``Vol(S^{n-1}) r^n e^{-r^2/2} / (n (2 pi)^{n/2})``. The same
    integral over the complement is the negative of this.
    """
    if spec.radius == 0:
        return 0.0
    return math.exp(log_second_moment_defect_ball(spec.dim, spec.radius))


def gamma_expansion_bounds(m: float) -> GammaExpansionBounds:
    """Bracket for the remainder ``lambda_m`` in the Stirling-type expansion."""
    if m < 3:
        raise ValueError(f"index m must be >= 3, got {m}")
    base = 1.0 / (360 * m * (m - 1) * (m + 1))
    denom2 = m * m * (m - 1) * (m + 1)
    return GammaExpansionBounds(m, base - 1.0 / (120 * denom2), base + 11.0 / (480 * denom2))


def gamma_half_expansion(n: int) -> tuple[float, float]:
    """Interval ``[lower, upper]`` containing ``Gamma(n/2)``, for ``n >= 8``.

    ``Gamma(n/2) = sqrt(2 pi) m^{(n-1)/2} e^{-m} e^{1/(6(n-2))} e^{-lambda_m}``
    with ``m = (n-2)/2`` and ``lambda_m`` bracketed by
    :func:`gamma_expansion_bounds`.
    """
    if int(n) != n or n < 8:
        raise ValueError(f"n must be an integer >= 8, got {n!r}")
    m = (n - 2) / 2.0
    b = gamma_expansion_bounds(m)
    log_base = 0.5 * math.log(2 * math.pi) + (n - 1) / 2 * math.log(m) - m + 1.0 / (6 * (n - 2))
    return math.exp(log_base - b.lambda_upper), math.exp(log_base - b.lambda_lower)


def edgeworth_ball_measure(sr: ScaledRadius) -> EdgeworthTerms:
    """Exact measure of ``B(0, r(s, n))`` next to its CLT and printed correction."""
    n, s = sr.dim, sr.s
    exact = gaussian_measure_ball(BallSpec(n, sr.radius))
    clt = float(stats.norm.cdf(s))
    corr = (1 - s * s) * math.exp(-s * s / 2) / math.sqrt(2 * math.pi) / math.sqrt(n)
    return EdgeworthTerms(exact, clt, corr)
