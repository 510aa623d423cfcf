"""Ornstein-Uhlenbeck operator, noise stability and its small-correlation expansion.

``T_rho f(x) = E f(rho x + sqrt(1 - rho^2) Z)``. On Hermite coefficients it is
multiplication by ``rho^{|l|}``, so noise stability of ``(A, B)`` is the
weighted coefficient pairing ``sum_l rho^{|l|} c_A(l) c_B(l)``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special, stats

from .gaussian_core import radius_for_measure
from .hermite import hermite_table, multi_indices
from .sets import (
    Ball,
    BallComplement,
    FourierTable,
    IntervalUnion1D,
    Strip,
    SymmetricSet,
    _PolarSet,
    cross_moment,
    defect_vector,
    fourier_table,
    DEFAULT_DEGREE,
)

__all__ = [
    "Correlation",
    "StabilityEstimate",
    "LevelSetReport",
    "TRhoValue",
    "QuadraticRemainder",
    "RearrangementDeficit",
    "t_rho_apply",
    "t_rho_direct",
    "hermite_tail_bound",
    "stability_series",
    "stability_mc",
    "second_derivative_at_zero",
    "functional_F",
    "quadratic_remainder",
    "t_rho_derivative_1d",
    "level_set_check",
    "rearrangement_deficit",
    "quadratic_first_variation",
    "as_interval_union",
]


@dataclass(frozen=True)
class Correlation:
    rho: float

    def __post_init__(self):
        if not (-1.0 < self.rho < 1.0):
            raise ValueError(f"correlation must satisfy -1 < rho < 1, got {self.rho!r}")

    def __float__(self):
        return float(self.rho)


def _rho(rho) -> float:
    return float(rho) if isinstance(rho, Correlation) else Correlation(float(rho)).rho


@dataclass(frozen=True)
class StabilityEstimate:
    value: float
    method: str
    truncation_degree: Optional[int] = None
    tail_bound: Optional[float] = None
    std_error: Optional[float] = None


@dataclass(frozen=True)
class TRhoValue:
    value: np.ndarray
    tail_bound: np.ndarray


@dataclass(frozen=True)
class LevelSetReport:
    threshold: float
    is_sublevel_set: bool
    max_violation: float
    threshold_b: float = float("nan")
    degenerate: bool = False


@dataclass(frozen=True)
class QuadraticRemainder:
    stability: float
    quadratic_model: float
    remainder: float
    bound: float


@dataclass(frozen=True)
class RearrangementDeficit:
    lhs: float
    rhs: float
    l1_distance: float
    roundoff: float = 0.0

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        """``lhs <= rhs`` up to the rounding error of evaluating both sides."""
        return self.slack >= -self.roundoff


def as_interval_union(A: SymmetricSet) -> IntervalUnion1D:
    if A.dim != 1:
        raise ValueError(f"{A.label()} is not one-dimensional")
    if isinstance(A, IntervalUnion1D):
        return A
    if isinstance(A, Strip):
        return IntervalUnion1D([(-A.halfwidth, A.halfwidth)])
    return IntervalUnion1D(A.intervals())


def _tail_series(q: float, degree: int, n: int) -> float:
    """``sum_{k > degree} C(k+n-1, n-1) k^n q^k`` for ``0 <= q < 1``."""
    if q >= 1.0:
        return math.inf
    if q == 0.0:
        return 0.0
    total = 0.0
    k = degree + 1
    while True:
        log_t = (special.gammaln(k + n) - special.gammaln(k + 1) - special.gammaln(n)
                 + n * math.log(k) + k * math.log(q))
        t = math.exp(log_t)
        total += t
        # term ratio bounds the remaining geometric tail once it drops below 1
        ratio = (k + n) / (k + 1) * ((k + 1) / k) ** n * q
        if ratio < 1 and t * ratio / (1 - ratio) <= 1e-16 * total:
            return total + t * ratio / (1 - ratio)
        k += 1


def hermite_tail_bound(rho: float, x, degree: int, n: int, coef_bound: float):
    """Bound on ``|sum_{|l| > degree} rho^{|l|} c(l) sqrt(l!) h_l(x)|``.

    Each ``|c(l)| <= coef_bound`` and ``|sqrt(l!) h_l(x)|`` is dominated by
    ``|l|^n 3^{|l|} m^{|l|}`` with ``m = max(1, max_i |x_i|)``; there are
    ``C(k+n-1, n-1)`` indices of degree ``k``. Infinite when ``3|rho| m >= 1``.
    """
    x = np.asarray(x, dtype=float)
    m = np.maximum(1.0, np.max(np.abs(x), axis=-1))
    q = 3.0 * abs(rho) * m
    cache = {}
    flat = np.array([cache.setdefault(qi, _tail_series(qi, degree, n)) for qi in q.ravel()])
    return coef_bound * flat.reshape(q.shape)


def _table_coef_bound(A) -> float:
    if isinstance(A, FourierTable):
        return math.inf if A.coef_bound is None else A.coef_bound
    g = A.measure()
    return math.sqrt(max(g * (1.0 - g), 0.0))


def t_rho_apply(A, rho, x, degree: int = DEFAULT_DEGREE, tol: Optional[float] = None) -> TRhoValue:
    """``T_rho`` of a set indicator (or a coefficient table) at points ``x``.

    Truncated Hermite series through ``degree`` with a Hermite growth tail
    bound. With ``tol`` given, raises if the bound exceeds it anywhere.
    """
    rho = _rho(rho)
    table = A if isinstance(A, FourierTable) else fourier_table(A, degree)
    if table.degree < degree:
        raise ValueError(f"table degree {table.degree} < requested {degree}")
    n = table.dim
    x = np.asarray(x, dtype=float)
    if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != n:
        raise ValueError(f"points must have trailing dimension {n}")
    H = [hermite_table(degree, x[..., i]) for i in range(n)]
    total = np.zeros(x.shape[:-1])
    for ell in multi_indices(n, degree):
        c = table[ell]
        if c == 0.0:
            continue
        k = sum(ell)
        basis = math.sqrt(math.prod(math.factorial(e) for e in ell))
        for i, e in enumerate(ell):
            basis = basis * H[i][e]
        total = total + rho**k * c * basis
    tail = hermite_tail_bound(rho, x, degree, n, _table_coef_bound(A))
    if tol is not None and np.any(tail > tol):
        raise ValueError(f"degree {degree} insufficient: tail bound {np.max(tail):.3g} > tol {tol:.3g}")
    return TRhoValue(total, tail)


def _interval_t_rho(U: IntervalUnion1D, rho: float, x):
    x = np.asarray(x, dtype=float)
    sig = math.sqrt(1.0 - rho * rho)
    out = np.zeros_like(x)
    for lo, hi in U.intervals():
        out = out + stats.norm.cdf((hi - rho * x) / sig) - stats.norm.cdf((lo - rho * x) / sig)
    return out


def t_rho_direct(A: SymmetricSet, rho, x, radial_nodes: int = 64):
    """``T_rho 1_A(x)`` straight from the defining Gaussian integral.

    Closed forms where they exist (intervals, strips, balls via the noncentral
    chi-square law); polar quadrature of the shifted Gaussian for 2D curved sets.
    """
    rho = _rho(rho)
    sig2 = 1.0 - rho * rho
    x = np.asarray(x, dtype=float)
    if A.dim == 1:
        if x.ndim and x.shape[-1] == 1:
            x = x[..., 0]
        return _interval_t_rho(as_interval_union(A), rho, x)
    if isinstance(A, Strip):
        return _interval_t_rho(IntervalUnion1D([(-A.halfwidth, A.halfwidth)]), rho, x[..., 0])
    if isinstance(A, (Ball, BallComplement)):
        nc = rho * rho * np.sum(x * x, axis=-1) / sig2
        p = stats.ncx2.cdf(A.radius**2 / sig2, A.dim, np.maximum(nc, 1e-300))
        return p if isinstance(A, Ball) else 1.0 - p
    if isinstance(A, _PolarSet):
        theta, R = A.grid()
        u, w = np.polynomial.legendre.leggauss(radial_nodes)
        s = 0.5 * (u + 1)[None, :] * R[:, None]
        ws = 0.5 * w[None, :] * R[:, None] * s
        pts = np.stack([s * np.cos(theta)[:, None], s * np.sin(theta)[:, None]], axis=-1)
        flat = x.reshape(-1, 2)
        vals = np.empty(len(flat))
        for i, xi in enumerate(flat):
            d2 = np.sum((pts - rho * xi) ** 2, axis=-1)
            dens = np.exp(-d2 / (2 * sig2)) / (2 * math.pi * sig2)
            vals[i] = np.sum(dens * ws) * (2 * math.pi / theta.size)
        return vals.reshape(x.shape[:-1])
    raise TypeError(f"no direct evaluator for {A.label()}")


def stability_series(A: SymmetricSet, B: SymmetricSet, rho, degree: int = DEFAULT_DEGREE) -> StabilityEstimate:
    """``int 1_A T_rho 1_B dgamma_n`` from Hermite coefficients through ``degree``.

    The tail beyond ``degree`` is bounded by Cauchy-Schwarz with the exact
    Parseval remainders ``gamma(A) - sum c_A^2`` (and likewise for ``B``).
    """
    rho = _rho(rho)
    if A.dim != B.dim:
        raise ValueError("sets live in different dimensions")
    ta = fourier_table(A, degree)
    tb = ta if B is A else fourier_table(B, degree)
    value = 0.0
    for ell, ca in ta.coeffs.items():
        value += rho ** sum(ell) * ca * tb.coeffs[ell]
    rem_a = max(A.measure() - ta.l2_mass(), 0.0)
    rem_b = max(B.measure() - tb.l2_mass(), 0.0)
    tail = abs(rho) ** (degree + 1) * math.sqrt(rem_a * rem_b)
    return StabilityEstimate(value, "series", degree, tail, None)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SYMSTAB_THREADS", "1")))
    except ValueError:
        return 1


def stability_mc(A: SymmetricSet, B: SymmetricSet, rho, samples: int, seed: int,
                 batch_size: int = 1 << 16) -> StabilityEstimate:
    """Monte Carlo frequency of ``(X, rho X + sqrt(1-rho^2) Z) in A x B``.

    Each batch draws from its own Philox stream spawned from ``seed``, so the
    result depends only on ``(seed, samples, batch_size)``, not on threading.
    """
    rho = _rho(rho)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if A.dim != B.dim:
        raise ValueError("sets live in different dimensions")
    n = A.dim
    sig = math.sqrt(1.0 - rho * rho)
    sizes = [batch_size] * (samples // batch_size)
    if samples % batch_size:
        sizes.append(samples % batch_size)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(args):
        ss, size = args
        rng = np.random.Generator(np.random.Philox(ss))
        X = rng.standard_normal((size, n))
        Y = rho * X + sig * rng.standard_normal((size, n))
        return int(np.count_nonzero(A.contains(X) & B.contains(Y)))

    jobs = list(zip(children, sizes))
    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            hits = sum(ex.map(run, jobs))
    else:
        hits = sum(map(run, jobs))
    p = hits / samples
    return StabilityEstimate(p, "montecarlo", None, None, math.sqrt(p * (1 - p) / samples))


def functional_F(A: SymmetricSet) -> float:
    """``sum_i (int_A (1 - x_i^2) dgamma_n)^2``."""
    return float(np.sum(defect_vector(A) ** 2))


def second_derivative_at_zero(A: SymmetricSet) -> float:
    """``d^2/drho^2`` of ``int 1_A T_rho 1_A`` at ``rho = 0``.

    Twice the squared degree-2 coefficients: the diagonal ``l = 2 e_i``
    entries give ``F(A)`` and each unordered pair ``i < j`` adds
    ``2 (int_A x_i x_j)^2``.
    """
    total = functional_F(A)
    for i in range(A.dim):
        for j in range(i + 1, A.dim):
            total += 2.0 * cross_moment(A, i, j) ** 2
    return total


def quadratic_remainder(A: SymmetricSet, rho, degree: int = DEFAULT_DEGREE) -> QuadraticRemainder:
    rho = _rho(rho)
    s = stability_series(A, A, rho, degree).value
    model = A.measure() ** 2 + 0.5 * rho * rho * second_derivative_at_zero(A)
    return QuadraticRemainder(s, model, abs(s - model), abs(rho) ** 3)


def t_rho_derivative_1d(B: SymmetricSet, rho, x):
    """``d/dx T_rho 1_B(x)`` from ``rho/sqrt(1-rho^2) int y 1_B(rho x + sqrt(1-rho^2) y) dgamma_1(y)``."""
    rho = _rho(rho)
    U = as_interval_union(B)
    x = np.asarray(x, dtype=float)
    sig = math.sqrt(1.0 - rho * rho)
    out = np.zeros_like(x)
    if rho == 0:
        return out if out.ndim else 0.0
    for lo, hi in U.intervals():
        # int_a^b y phi(y) dy = phi(a) - phi(b)
        out = out + stats.norm.pdf((lo - rho * x) / sig) - stats.norm.pdf((hi - rho * x) / sig)
    out = rho / sig * out
    return out if out.ndim else float(out)


def _sublevel_mismatch(inside, values, weights):
    """Best ``c`` and mass of ``{inside} xor {values <= c}`` over all cuts."""
    order = np.argsort(values, kind="stable")
    v, ins, w = values[order], inside[order], weights[order]
    # cut after position j: points [0, j) are in the sublevel set
    out_mass = np.concatenate([[0.0], np.cumsum(w * (~ins))])
    in_mass = np.concatenate([np.cumsum((w * ins)[::-1])[::-1], [0.0]])
    mism = out_mass + in_mass
    # only cut between distinct values
    valid = np.ones(mism.size, dtype=bool)
    valid[1:-1] = v[1:] > v[:-1]
    mism = np.where(valid, mism, np.inf)
    j = int(np.argmin(mism))
    if j == 0:
        c = v[0] - 1.0
    elif j == v.size:
        c = v[-1]
    else:
        c = 0.5 * (v[j - 1] + v[j])
    return float(c), float(mism[j])


def level_set_check(A: SymmetricSet, B: SymmetricSet, rho, grid: int = 4096,
                    half_width: float = 6.0, tol: Optional[float] = None) -> LevelSetReport:
    """How far ``(A, B)`` is from ``A = {T_rho 1_B <= c}``, ``B = {T_rho 1_A <= c'}``.

    Works on the symmetric grid of ``grid`` cells over ``[-half_width, half_width]``
    (only the positive half is scanned, by symmetry). ``max_violation`` is the
    larger Gaussian mass of the two symmetric differences at their best
    thresholds. Default ``tol`` is four of the heaviest grid cells.
    """
    rho = _rho(rho)
    UA, UB = as_interval_union(A), as_interval_union(B)
    edges = np.linspace(0.0, half_width, grid // 2 + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    w = 2.0 * np.diff(stats.norm.cdf(edges))
    if tol is None:
        tol = 4.0 * float(np.max(w))
    if rho == 0:
        return LevelSetReport(UB.measure(), True, 0.0, UA.measure(), degenerate=True)
    inA, inB = UA.contains(mid), UB.contains(mid)
    c, va = _sublevel_mismatch(inA, _interval_t_rho(UB, rho, mid), w)
    cb, vb = _sublevel_mismatch(inB, _interval_t_rho(UA, rho, mid), w)
    worst = max(va, vb)
    return LevelSetReport(c, worst <= tol, worst, cb)


def _intersection_measure(U: IntervalUnion1D, V: IntervalUnion1D) -> float:
    total = 0.0
    for a, b in U.intervals():
        for c, d in V.intervals():
            lo, hi = max(a, c), min(b, d)
            if hi > lo:
                total += stats.norm.cdf(hi) - stats.norm.cdf(lo)
    return total


def rearrangement_deficit(Bprime: SymmetricSet, a: Optional[float] = None,
                          reference: str = "ball", tol: float = 1e-9) -> RearrangementDeficit:
    """Both sides of the one-dimensional stability inequality.

    With ``B`` the centered interval of the same measure ``a`` as ``B'``:
    ``lhs = int_B (x^2-1) - int_B' (x^2-1)`` and
    ``rhs = -(a/6) (int |1_B' - 1_B|)^2``; the claim is ``lhs <= rhs``.
    ``reference="complement"`` compares against the complement of a centered
    interval instead, by applying the same inequality to complements.
    """
    U = as_interval_union(Bprime)
    m = U.measure()
    if a is not None and abs(m - a) > tol:
        raise ValueError(f"measure of B' is {m}, expected {a}")
    if reference == "complement":
        inner = rearrangement_deficit(U.complement(), reference="ball")
        return inner
    if reference != "ball":
        raise ValueError("reference must be 'ball' or 'complement'")
    if m <= 0.0 or m >= 1.0:
        return RearrangementDeficit(0.0, 0.0, 0.0)
    r = radius_for_measure(1, m)
    B = IntervalUnion1D([(-r, r)])
    # int (1 - x^2) over a union of intervals is [x phi(x)] at the endpoints
    def defect(V):
        return sum((hi * stats.norm.pdf(hi) if np.isfinite(hi) else 0.0)
                   - (lo * stats.norm.pdf(lo) if np.isfinite(lo) else 0.0) for lo, hi in V.intervals())
    du, db = defect(U), defect(B)
    lhs = float(du - db)
    l1 = max(B.measure() + m - 2.0 * _intersection_measure(U, B), 0.0)
    roundoff = 64 * np.finfo(float).eps * (abs(du) + abs(db) + 1.0)
    return RearrangementDeficit(lhs, -(m / 6.0) * l1 * l1, l1, roundoff)


def quadratic_first_variation(A: SymmetricSet, x) -> np.ndarray:
    """``int_A [sum_i (x_i^2-1)(y_i^2-1) + 2 sum_{i != j} x_i x_j y_i y_j] dgamma_n(y)``.

    Superlevel sets of this function are the first-variation candidates for
    maximizing the squared degree-2 coefficients.
    """
    x = np.asarray(x, dtype=float)
    n = A.dim
    if x.shape[-1] != n:
        raise ValueError(f"points must have trailing dimension {n}")
    d = defect_vector(A)
    out = np.sum((x * x - 1.0) * (-d), axis=-1)
    for i in range(n):
        for j in range(n):
            if i != j:
                out = out + 2.0 * x[..., i] * x[..., j] * cross_moment(A, i, j)
    return out
