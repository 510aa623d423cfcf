"""Origin-symmetric sets, their Gaussian measures and Hermite-Fourier coefficients.

Every set exposes Gaussian monomial moments ``int_A x^alpha dgamma_n``; the
coefficients ``int_A sqrt(l!) h_l dgamma_n``, the defect vector and the cross
moments are all linear combinations of those moments. Radial sets use exact
incomplete-gamma moments. The 2D curved sets (ellipse, star-shaped) reduce to
a single periodic angular integral, evaluated by the trapezoid rule after the
radial integral is done in closed form.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special, stats

from .gaussian_core import BallSpec, gaussian_measure_ball
from .hermite import (
    ExponentialTilt,
    degree,
    hermite_interval_integral,
    hermite_monomial_coefficients,
    multi_factorial,
    multi_indices,
)

__all__ = [
    "SymmetricSet",
    "Ball",
    "BallComplement",
    "Strip",
    "Ellipse2D",
    "IntervalUnion1D",
    "StarShaped2D",
    "FourierTable",
    "Complement",
    "full_space",
    "set_measure",
    "fourier_coefficient",
    "fourier_table",
    "defect_vector",
    "cross_moment",
    "gaussian_moment",
    "parse_set",
    "union_from_radial_mass",
    "random_interval_union",
    "DEFAULT_DEGREE",
    "DEFAULT_ANGULAR_GRID",
]

DEFAULT_DEGREE = 20
DEFAULT_ANGULAR_GRID = 2048
_SYM_TOL = 1e-12


def gaussian_moment(alpha) -> float:
    """``E[X^alpha]`` for a standard Gaussian vector: ``prod (alpha_i - 1)!!``."""
    out = 1.0
    for a in alpha:
        if a % 2:
            return 0.0
        out *= float(math.prod(range(a - 1, 0, -2)))
    return out


def _half_line_moment(k: int, t: float) -> float:
    """``int_0^t x^k dgamma_1(x)`` for any real ``t`` (possibly infinite)."""
    if t == 0:
        return 0.0
    sign = 1.0 if t > 0 else (-1.0) ** (k + 1)
    a = (k + 1) / 2.0
    p = 1.0 if np.isinf(t) else special.gammainc(a, t * t / 2.0)
    full = 2.0 ** (k / 2.0) * special.gamma(a) / (2.0 * math.sqrt(math.pi))
    return sign * full * p


def _radial_polar_integral(k: int, R: np.ndarray) -> np.ndarray:
    """``int_0^R s^{k+1} e^{-s^2/2} ds`` in closed form, vectorized over ``R``."""
    a = k / 2.0 + 1.0
    return 2.0 ** (k / 2.0) * special.gamma(a) * special.gammainc(a, R * R / 2.0)


class SymmetricSet:
    """Base class. Subclasses implement ``dim``, ``contains`` and ``moment``."""

    dim: int

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def measure(self) -> float:
        return float(min(1.0, max(0.0, self.moment((0,) * self.dim))))

    def moment(self, alpha) -> float:
        raise NotImplementedError

    def label(self) -> str:
        return type(self).__name__

    def coefficient(self, ell) -> float:
        ell = tuple(int(e) for e in ell)
        if len(ell) != self.dim:
            raise ValueError(f"multi-index length {len(ell)} != set dimension {self.dim}")
        if sum(ell) % 2:
            return 0.0
        if sum(ell) == 0:
            return self.measure()
        per_axis = []
        for e in ell:
            c = hermite_monomial_coefficients(e)
            per_axis.append([(k, float(c[k])) for k in range(e + 1) if c[k] != 0])
        total = 0.0
        for combo in _product(per_axis):
            alpha = tuple(k for k, _ in combo)
            weight = math.prod(w for _, w in combo)
            total += weight * self.moment(alpha)
        return math.sqrt(multi_factorial(ell)) * total

    def complement(self) -> "SymmetricSet":
        return Complement(self)


class Complement(SymmetricSet):
    """``R^n`` minus a symmetric set; moments are Gaussian moments minus the set's."""

    def __init__(self, base: SymmetricSet):
        self.base = base
        self.dim = base.dim

    def __repr__(self):
        return f"Complement({self.base!r})"

    def label(self):
        return f"complement of {self.base.label()}"

    def contains(self, points):
        return ~self.base.contains(points)

    def measure(self):
        return 1.0 - self.base.measure()

    def moment(self, alpha):
        return gaussian_moment(alpha) - self.base.moment(alpha)

    def coefficient(self, ell):
        ell = tuple(int(e) for e in ell)
        if sum(ell) == 0:
            return self.measure()
        return -self.base.coefficient(ell)

    def complement(self):
        return self.base


def _product(lists):
    if not lists:
        yield ()
        return
    for head in lists[0]:
        for tail in _product(lists[1:]):
            yield (head,) + tail


def _check_dim(n):
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    return int(n)


@dataclass(frozen=True)
class Ball(SymmetricSet):
    dim: int
    radius: float

    def __post_init__(self):
        BallSpec(_check_dim(self.dim), self.radius)

    def label(self):
        return f"ball n={self.dim} r={self.radius:g}"

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        return np.sum(points * points, axis=-1) < self.radius**2

    def measure(self):
        return gaussian_measure_ball(BallSpec(self.dim, self.radius))

    def moment(self, alpha):
        alpha = tuple(alpha)
        base = gaussian_moment(alpha)
        if base == 0.0 or self.radius == 0:
            return 0.0
        return base * float(special.gammainc((self.dim + sum(alpha)) / 2.0, self.radius**2 / 2.0))

    def coefficient(self, ell):
        if self.dim == 1:
            return IntervalUnion1D([(-self.radius, self.radius)]).coefficient(ell)
        return super().coefficient(ell)

    def complement(self):
        return BallComplement(self.dim, self.radius)

    def intervals(self):
        _require_1d(self)
        return [(-self.radius, self.radius)] if self.radius > 0 else []


@dataclass(frozen=True)
class BallComplement(SymmetricSet):
    dim: int
    radius: float

    def __post_init__(self):
        BallSpec(_check_dim(self.dim), self.radius)

    def label(self):
        return f"complement n={self.dim} r={self.radius:g}"

    def contains(self, points):
        return ~Ball(self.dim, self.radius).contains(points)

    def measure(self):
        return 1.0 - gaussian_measure_ball(BallSpec(self.dim, self.radius))

    def moment(self, alpha):
        return gaussian_moment(alpha) - Ball(self.dim, self.radius).moment(alpha)

    def coefficient(self, ell):
        if sum(ell) == 0:
            return self.measure()
        return -Ball(self.dim, self.radius).coefficient(ell)

    def complement(self):
        return Ball(self.dim, self.radius)

    def intervals(self):
        _require_1d(self)
        if self.radius == 0:
            return [(-np.inf, np.inf)]
        return [(-np.inf, -self.radius), (self.radius, np.inf)]


def full_space(n: int) -> BallComplement:
    return BallComplement(n, 0.0)


@dataclass(frozen=True)
class Strip(SymmetricSet):
    """``{x in R^n : |x_1| <= halfwidth}``."""

    dim: int
    halfwidth: float

    def __post_init__(self):
        _check_dim(self.dim)
        if not self.halfwidth >= 0:
            raise ValueError("halfwidth must be >= 0")

    def label(self):
        return f"strip n={self.dim} w={self.halfwidth:g}"

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        return np.abs(points[..., 0]) <= self.halfwidth

    def measure(self):
        return float(special.erf(self.halfwidth / math.sqrt(2.0)))

    def moment(self, alpha):
        alpha = tuple(alpha)
        rest = gaussian_moment(alpha[1:])
        if rest == 0.0 or alpha[0] % 2:
            return 0.0
        return 2.0 * _half_line_moment(alpha[0], self.halfwidth) * rest

    def coefficient(self, ell):
        ell = tuple(ell)
        if any(ell[1:]):
            return 0.0
        return IntervalUnion1D([(-self.halfwidth, self.halfwidth)]).coefficient(ell[:1])


class IntervalUnion1D(SymmetricSet):
    """Finite union of intervals in ``R``, closed under ``x -> -x``.

    Stored as maximal disjoint intervals sorted left to right; endpoints may be
    ``+-inf``. Construction fails if the union is not symmetric.
    """

    dim = 1

    def __init__(self, intervals=()):
        merged = []
        for lo, hi in sorted((float(a), float(b)) for a, b in intervals):
            if hi < lo:
                raise ValueError(f"empty/inverted interval ({lo}, {hi})")
            if hi == lo:
                continue
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        mirrored = sorted((-hi, -lo) for lo, hi in merged)
        if len(mirrored) != len(merged) or any(
            not (_close(a, c) and _close(b, d)) for (a, b), (c, d) in zip(merged, mirrored)
        ):
            raise ValueError(f"interval union {merged} is not symmetric about 0")
        self._intervals = tuple(merged)

    def __repr__(self):
        return f"IntervalUnion1D({list(self._intervals)!r})"

    def __eq__(self, other):
        return isinstance(other, IntervalUnion1D) and self._intervals == other._intervals

    def __hash__(self):
        return hash(self._intervals)

    def label(self):
        if not self._intervals:
            return "intervals {}"
        return "intervals " + "U".join(f"[{a:g},{b:g}]" for a, b in self._intervals)

    def intervals(self):
        return list(self._intervals)

    def contains(self, points):
        x = np.asarray(points, dtype=float)
        if x.ndim and x.shape[-1] == 1:
            x = x[..., 0]
        out = np.zeros(x.shape, dtype=bool)
        for lo, hi in self._intervals:
            out |= (x >= lo) & (x <= hi)
        return out

    def measure(self):
        total = sum(stats.norm.cdf(hi) - stats.norm.cdf(lo) for lo, hi in self._intervals)
        return float(min(1.0, max(0.0, total)))

    def moment(self, alpha):
        (k,) = tuple(alpha)
        return float(sum(_half_line_moment(k, hi) - _half_line_moment(k, lo) for lo, hi in self._intervals))

    def coefficient(self, ell):
        (e,) = tuple(ell)
        if e == 0:
            return self.measure()
        if e % 2:
            return 0.0
        s = sum(hermite_interval_integral(e, lo, hi) for lo, hi in self._intervals)
        return math.sqrt(math.factorial(e)) * s

    def complement(self):
        edges = [-np.inf]
        for lo, hi in self._intervals:
            edges += [lo, hi]
        edges.append(np.inf)
        pieces = [(edges[i], edges[i + 1]) for i in range(0, len(edges), 2) if edges[i] < edges[i + 1]]
        return IntervalUnion1D(pieces)


def _close(a, b):
    if np.isinf(a) or np.isinf(b):
        return a == b
    return abs(a - b) <= _SYM_TOL * max(1.0, abs(a))


def _require_1d(A):
    if A.dim != 1:
        raise ValueError(f"{A.label()} is not one-dimensional")


class _PolarSet(SymmetricSet):
    """2D set ``{s (cos t, sin t) : s <= R(t)}`` with a smooth periodic ``R``."""

    dim = 2

    def grid(self):
        """Uniform angles and boundary radii used by the trapezoid rule."""
        raise NotImplementedError

    def radius_at(self, theta):
        raise NotImplementedError

    def contains(self, points):
        p = np.asarray(points, dtype=float)
        s = np.hypot(p[..., 0], p[..., 1])
        return s <= self.radius_at(np.arctan2(p[..., 1], p[..., 0]))

    def measure(self):
        _, R = self.grid()
        return float(min(1.0, max(0.0, np.mean(-np.expm1(-R * R / 2.0)))))

    def moment(self, alpha):
        a1, a2 = tuple(alpha)
        theta, R = self.grid()
        k = a1 + a2
        ang = np.cos(theta) ** a1 * np.sin(theta) ** a2
        return float(np.mean(ang * _radial_polar_integral(k, R)))


@dataclass(frozen=True)
class Ellipse2D(_PolarSet):
    """``{x : x_1^2/a_1^2 + x_2^2/a_2^2 <= 1}``."""

    semi_axis_1: float
    semi_axis_2: float
    grid_size: int = DEFAULT_ANGULAR_GRID
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        if not (self.semi_axis_1 > 0 and self.semi_axis_2 > 0):
            raise ValueError("semi-axes must be positive")
        if self.grid_size < 8 or self.grid_size % 2:
            raise ValueError("grid_size must be an even integer >= 8")

    def label(self):
        return f"ellipse a={self.semi_axis_1:g} b={self.semi_axis_2:g}"

    def radius_at(self, theta):
        theta = np.asarray(theta, dtype=float)
        c, s = np.cos(theta), np.sin(theta)
        return (c * c / self.semi_axis_1**2 + s * s / self.semi_axis_2**2) ** -0.5

    def grid(self):
        theta = 2 * np.pi * np.arange(self.grid_size) / self.grid_size
        return theta, self.radius_at(theta)

    def coefficient(self, ell):
        # reflection symmetry in each axis kills odd per-axis moments
        if any(e % 2 for e in ell):
            return 0.0
        return super().coefficient(ell)


class StarShaped2D(_PolarSet):
    """Star-shaped planar set given by boundary radii on a uniform angle grid.

    ``samples[k] = R(2 pi k / M)``. Between grid points ``R`` is the
    trigonometric interpolant of the samples.
    """

    def __init__(self, samples):
        R = np.asarray(samples, dtype=float)
        if R.ndim != 1 or R.size < 8 or R.size % 2:
            raise ValueError("need an even number (>= 8) of boundary samples")
        if np.any(R <= 0) or not np.all(np.isfinite(R)):
            raise ValueError("boundary radii must be positive and finite")
        half = R.size // 2
        if np.max(np.abs(R[:half] - R[half:])) > _SYM_TOL * max(1.0, np.max(R)):
            raise ValueError("boundary is not symmetric: R(theta) != R(theta + pi)")
        self.samples = R
        self._fft = np.fft.rfft(R) / R.size

    @classmethod
    def from_function(cls, func, grid_size=DEFAULT_ANGULAR_GRID):
        theta = 2 * np.pi * np.arange(grid_size) / grid_size
        R = np.asarray(func(theta), dtype=float)
        half = grid_size // 2
        # enforce exact symmetry against rounding in func
        R = 0.5 * (R + np.roll(R, half))
        return cls(R)

    @classmethod
    def from_csv(cls, path, grid_size=None):
        """Read ``theta,R`` rows (header optional) on a uniform grid from 0."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    continue
        if not rows:
            raise ValueError(f"no (theta, R) rows in {path}")
        theta = np.array([r[0] for r in rows])
        R = np.array([r[1] for r in rows])
        M = len(R)
        if grid_size is not None and grid_size != M:
            raise ValueError(f"expected {grid_size} samples, found {M}")
        if not np.allclose(theta, 2 * np.pi * np.arange(M) / M, atol=1e-9):
            raise ValueError("theta column must be the uniform grid 2*pi*k/M")
        return cls(R)

    def __repr__(self):
        return f"StarShaped2D(M={self.samples.size})"

    def label(self):
        return f"star m={self.samples.size}"

    def grid(self):
        M = self.samples.size
        return 2 * np.pi * np.arange(M) / M, self.samples

    def _modes(self):
        M = self.samples.size
        k = np.arange(self._fft.size)
        w = np.where((k == 0) | (2 * k == M), 1.0, 2.0)
        return k, w * self._fft

    def radius_at(self, theta):
        theta = np.asarray(theta, dtype=float)
        k, c = self._modes()
        return np.real(np.exp(1j * np.multiply.outer(theta, k)) @ c)

    def radius_derivative(self, theta, order=1):
        theta = np.asarray(theta, dtype=float)
        k, c = self._modes()
        M = self.samples.size
        # the Nyquist mode has no well-defined derivative; drop it
        c = np.where(2 * k == M, 0.0, c)
        return np.real(np.exp(1j * np.multiply.outer(theta, k)) @ ((1j * k) ** order * c))


@dataclass
class FourierTable:
    """Truncated coefficients ``int f sqrt(l!) h_l dgamma_n`` for ``|l|_1 <= degree``."""

    set_id: str
    dim: int
    degree: int
    coeffs: dict
    # bound on |coefficient| for every index beyond the table (None: unknown)
    coef_bound: Optional[float] = None

    def __getitem__(self, ell):
        ell = tuple(ell)
        if sum(ell) > self.degree:
            raise KeyError(f"degree {sum(ell)} beyond table degree {self.degree}")
        return self.coeffs.get(ell, 0.0)

    def indices(self):
        return list(self.coeffs)

    def arrays(self):
        idx = self.indices()
        deg = np.array([sum(e) for e in idx])
        vals = np.array([self.coeffs[e] for e in idx])
        return idx, deg, vals

    def l2_mass(self) -> float:
        return float(sum(v * v for v in self.coeffs.values()))

    def apply_noise(self, rho: float) -> "FourierTable":
        """Coefficients of ``T_rho f``: each degree-``k`` entry scaled by ``rho^k``."""
        return FourierTable(
            f"T[{rho:g}]{self.set_id}",
            self.dim,
            self.degree,
            {e: rho ** sum(e) * v for e, v in self.coeffs.items()},
            self.coef_bound,
        )

    @classmethod
    def from_tilt(cls, tilt: ExponentialTilt, degree_cap: int):
        # |lam|^k / sqrt(k!) decreases once k >= lam^2
        k0 = max(degree_cap + 1, int(math.ceil(tilt.lam**2)))
        bound = max(abs(tilt.coefficient(k)) for k in range(degree_cap + 1, k0 + 1))
        return cls(
            f"tilt lambda={tilt.lam:g}", 1, degree_cap,
            {(k,): tilt.coefficient(k) for k in range(degree_cap + 1)},
            bound,
        )


def _radius_of_mass(u: float) -> float:
    """``x >= 0`` with ``gamma_1([-x, x]) = u``."""
    if u >= 1.0:
        return math.inf
    return float(stats.norm.isf((1.0 - u) / 2.0)) if u > 0 else 0.0


def union_from_radial_mass(pieces) -> IntervalUnion1D:
    """Symmetric union from ``[u0, u1)`` ranges of ``u = gamma_1([-|x|, |x|])``.

    Each range becomes ``{x : u0 <= gamma_1([-|x|,|x|]) < u1}``, a pair of
    mirrored intervals (or one centered interval when ``u0 = 0``), so the
    measure of the union is the total length of the ranges.
    """
    out = []
    for u0, u1 in pieces:
        if not 0.0 <= u0 <= u1 <= 1.0:
            raise ValueError(f"bad mass range ({u0}, {u1})")
        lo, hi = _radius_of_mass(u0), _radius_of_mass(u1)
        if hi > lo:
            out += [(lo, hi), (-hi, -lo)]
    return IntervalUnion1D(out)


def random_interval_union(a: float, rng: np.random.Generator, max_pieces: int = 4) -> IntervalUnion1D:
    """Random symmetric interval union of Gaussian measure exactly ``a``.

    The radial-mass line ``[0, 1)`` is split into alternating gaps and pieces
    with Dirichlet lengths; the innermost gap or the outermost gap is dropped
    at random so centered intervals and unbounded tails both occur.
    """
    if not 0.0 < a < 1.0:
        raise ValueError("need 0 < a < 1")
    k = int(rng.integers(1, max_pieces + 1))
    lengths = a * rng.dirichlet(np.ones(k))
    gaps = (1.0 - a) * rng.dirichlet(np.ones(k + 1))
    mode = int(rng.integers(0, 3))
    if mode == 1:
        gaps[1] += gaps[0]
        gaps[0] = 0.0
    elif mode == 2:
        gaps[-2] += gaps[-1]
        gaps[-1] = 0.0
    pieces, u = [], gaps[0]
    for i in range(k):
        pieces.append((u, min(1.0, u + lengths[i])))
        u += lengths[i] + gaps[i + 1]
    if mode == 2:
        pieces[-1] = (pieces[-1][0], 1.0)
    return union_from_radial_mass(pieces)


def set_measure(A: SymmetricSet) -> float:
    return A.measure()


def fourier_coefficient(A: SymmetricSet, ell, degree_cap: int = 60) -> float:
    if degree(ell) > degree_cap:
        raise ValueError(f"degree {degree(ell)} exceeds cap {degree_cap}")
    return A.coefficient(ell)


def fourier_table(A: SymmetricSet, degree_cap: int = DEFAULT_DEGREE) -> FourierTable:
    if degree_cap > 60:
        raise ValueError("degree cap above 60 is not supported")
    coeffs = {ell: A.coefficient(ell) for ell in multi_indices(A.dim, degree_cap)}
    gam = A.measure()
    # nonconstant coefficients pair h_l with 1_A - gamma, whose L2 norm is sqrt(gamma(1-gamma))
    return FourierTable(A.label(), A.dim, degree_cap, coeffs, math.sqrt(max(gam * (1 - gam), 0.0)))


def defect_vector(A: SymmetricSet) -> np.ndarray:
    """``(int_A (1 - x_i^2) dgamma_n)_i``."""
    n = A.dim
    gam = A.measure()
    out = np.empty(n)
    for i in range(n):
        alpha = [0] * n
        alpha[i] = 2
        out[i] = gam - A.moment(tuple(alpha))
    return out


def cross_moment(A: SymmetricSet, i: int, j: int) -> float:
    """``int_A x_i x_j dgamma_n`` for distinct 0-based axes ``i, j``."""
    n = A.dim
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ValueError(f"need distinct axes in [0, {n}), got ({i}, {j})")
    base = A.base if isinstance(A, Complement) else A
    if isinstance(base, (Ball, BallComplement, Strip, Ellipse2D)):
        return 0.0
    alpha = [0] * n
    alpha[i] += 1
    alpha[j] += 1
    return A.moment(tuple(alpha))


_KV = re.compile(r"(\w+)\s*=\s*([^\s]+)")


def parse_set(text: str) -> SymmetricSet:
    """Parse a one-line set description.

    ``ball n=2 r=2.4``, ``complement n=2 r=2.4``, ``ellipse a=2.5 b=2.31394``,
    ``strip n=2 w=1.90999``, ``intervals [-1,1]U[-3,-2]U[2,3]`` (``∪`` also
    accepted), ``star m=2048 file=boundary.csv``.
    """
    text = text.strip()
    if not text:
        raise ValueError("empty set description")
    kind, _, rest = text.partition(" ")
    kind = kind.lower()
    kv = dict(_KV.findall(rest))
    try:
        if kind == "ball":
            return Ball(int(kv["n"]), float(kv["r"]))
        if kind in ("complement", "ballc", "ball-complement"):
            return BallComplement(int(kv["n"]), float(kv["r"]))
        if kind == "ellipse":
            m = int(kv.get("m", DEFAULT_ANGULAR_GRID))
            return Ellipse2D(float(kv["a"]), float(kv["b"]), grid_size=m)
        if kind == "strip":
            return Strip(int(kv.get("n", 2)), float(kv["w"]))
        if kind == "intervals":
            body = rest.strip()
            if body in ("", "{}", "∅"):
                return IntervalUnion1D([])
            pieces = re.findall(r"\[\s*([^,\]]+)\s*,\s*([^\]]+)\s*\]", body)
            if not pieces:
                raise ValueError(f"no intervals found in {body!r}")
            return IntervalUnion1D([(float(a), float(b)) for a, b in pieces])
        if kind == "star":
            m = int(kv["m"]) if "m" in kv else None
            return StarShaped2D.from_csv(kv["file"], grid_size=m)
    except KeyError as exc:
        raise ValueError(f"missing parameter {exc} in {text!r}") from None
    raise ValueError(f"unknown set kind {kind!r}")
