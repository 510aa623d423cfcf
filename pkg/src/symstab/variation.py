"""First and second variations along flows, for balls and 2D star-shaped sets.

A flow is generated by a vector field ``X``; ``A_t`` is the image of ``A``
under the time-``t`` map. For a quadratic functional
``F(A) = int_A int_A G(x, y) dx dy`` every "second variation" returned here is
``(1/2) d^2/dt^2 F(A_t)`` at ``t = 0``, while :func:`measure_variation` returns
plain first and second derivatives of the Gaussian measure.

Boundary integrals use the periodic trapezoid rule on circles and a
Gauss-Legendre x trapezoid grid on 2-spheres. Every formula has a
finite-difference counterpart that integrates the flow numerically
(:func:`measure_fd`, :func:`kernel_functional_fd`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .gaussian_core import (
    BallSpec,
    second_moment_defect_ball,
    sphere_volume,
)
from .sets import Ball, BallComplement, StarShaped2D, _PolarSet

__all__ = [
    "NormalPerturbation",
    "FlowSpec",
    "VariationReport",
    "MeasureVariation",
    "PoincareReport",
    "GaussianProductKernel",
    "MehlerKernel",
    "QuadraticDefectKernel",
    "sphere_nodes",
    "sphere_moment",
    "g_basis",
    "g_gram",
    "poincare_ratio",
    "measure_variation",
    "measure_fd",
    "second_variation_F",
    "closed_form_bound",
    "second_variation_noise",
    "general_second_variation",
    "kernel_functional",
    "kernel_functional_fd",
    "phase_classify",
]

PHASES = ("locally_max", "boundary", "not_locally_max")


# ---------------------------------------------------------------- quadrature

def sphere_nodes(n: int, r: float, m: Optional[int] = None):
    """Nodes and surface-Lebesgue weights on ``dB(0, r)`` for ``n = 2, 3``."""
    if n == 2:
        M = m or 2048
        theta = 2 * np.pi * np.arange(M) / M
        pts = r * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return pts, np.full(M, r * 2 * np.pi / M)
    if n == 3:
        mp = m or 48
        u, wu = np.polynomial.legendre.leggauss(mp)
        ma = 2 * mp
        phi = 2 * np.pi * np.arange(ma) / ma
        s = np.sqrt(1 - u * u)
        pts = r * np.stack([np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)),
                            np.outer(u, np.ones(ma))], axis=-1).reshape(-1, 3)
        w = (r * r * np.outer(wu, np.full(ma, 2 * np.pi / ma))).reshape(-1)
        return pts, w
    raise NotImplementedError(f"surface quadrature only for n = 2, 3 (got n = {n}); use closed forms")


def _ball_solid_nodes(n: int, r: float, m: int = 24):
    """Nodes and Lebesgue weights filling ``B(0, r)`` for ``n = 2, 3``."""
    s, ws = np.polynomial.legendre.leggauss(m)
    s = 0.5 * r * (s + 1)
    ws = 0.5 * r * ws
    dirs, wd = sphere_nodes(n, 1.0, 4 * m if n == 2 else m)
    pts = (s[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    w = (ws[:, None] * s[:, None] ** (n - 1) * wd[None, :]).reshape(-1)
    return pts, w


def _polar_solid_nodes(A: _PolarSet, angular: int, radial: int):
    theta = 2 * np.pi * np.arange(angular) / angular
    R = np.asarray(A.radius_at(theta), dtype=float)
    u, wu = np.polynomial.legendre.leggauss(radial)
    s = 0.5 * (u + 1)[None, :] * R[:, None]
    w = 0.5 * wu[None, :] * R[:, None] * s * (2 * np.pi / angular)
    pts = np.stack([s * np.cos(theta)[:, None], s * np.sin(theta)[:, None]], axis=-1)
    return pts.reshape(-1, 2), w.reshape(-1)


def _gauss_density(x):
    n = x.shape[-1]
    return np.exp(-0.5 * np.sum(x * x, axis=-1)) / (2 * np.pi) ** (n / 2)


# ---------------------------------------------------------------- sphere algebra

def sphere_moment(n: int, r: float, kind: str) -> float:
    """``int_{dB(0,r)} x_1^4 dx`` (``kind="x1_4"``) or ``int x_1^2 x_2^2 dx`` (``"x1sq_x2sq"``)."""
    if n < 2:
        raise ValueError("sphere moments need n >= 2")
    base = r ** (n + 3) * sphere_volume(n) / (n * (n + 2))
    if kind == "x1_4":
        return 3.0 * base
    if kind == "x1sq_x2sq":
        return base
    raise ValueError(f"unknown moment kind {kind!r}")


def g_basis(x, r=None):
    """``g_i(x) = (n-1) x_i^2 - sum_{j != i} x_j^2``, stacked on the last axis."""
    x = np.asarray(x, dtype=float)
    return x.shape[-1] * x * x - np.sum(x * x, axis=-1, keepdims=True)


def g_gram(n: int, r: float) -> np.ndarray:
    """Exact Gram matrix ``int_{dB(0,r)} g_i g_j dx``.

    Diagonal ``2(n-1) r^{n+3} Vol / (n+2)``, off-diagonal ``-2 r^{n+3} Vol / (n+2)``.
    """
    k = r ** (n + 3) * sphere_volume(n) / (n + 2)
    return 2 * k * (n * np.eye(n) - np.ones((n, n)))


def _x_sq_g(n: int, r: float) -> np.ndarray:
    """``M[i, j] = int_{dB} x_i^2 g_j dx = 2K (n delta_ij - 1)``."""
    K = r ** (n + 3) * sphere_volume(n) / (n * (n + 2))
    return 2 * K * (n * np.eye(n) - np.ones((n, n)))


# ---------------------------------------------------------------- flows

@dataclass(frozen=True, eq=False)
class FlowSpec:
    """Vector field generating a flow.

    ``kind`` is ``"dilation"`` (``X = x``), ``"corollary_field"`` (the explicit
    cubic field whose normal part on ``dB(0, radius)`` is ``sum_i c_i g_i`` and
    which leaves the second measure variation at zero) or
    ``"polynomial_normal"`` (2D only: harmonic extension of boundary samples,
    corrected per Fourier mode so the second measure variation vanishes on the
    circle). ``scale`` multiplies the field; ``scale = 0`` gives the zero flow.
    """

    kind: str
    dim: int = 2
    radius: float = 1.0
    coeffs: tuple = (1.0,)
    samples: Optional[np.ndarray] = None
    scale: float = 1.0
    step: float = 1e-3
    _modes: tuple = field(default=(), init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("dilation", "corollary_field", "polynomial_normal"):
            raise ValueError(f"unknown flow kind {self.kind!r}")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.kind == "corollary_field":
            c = tuple(float(v) for v in self.coeffs) + (0.0,) * (self.dim - len(self.coeffs))
            if len(c) != self.dim:
                raise ValueError("too many g coefficients for the dimension")
            object.__setattr__(self, "coeffs", c)
        if self.kind == "polynomial_normal":
            if self.dim != 2 or self.samples is None:
                raise ValueError("polynomial_normal needs dim = 2 and boundary samples")
            object.__setattr__(self, "_modes", _trig_modes(np.asarray(self.samples, dtype=float)))

    @classmethod
    def zero(cls, dim: int = 2) -> "FlowSpec":
        return cls("dilation", dim=dim, scale=0.0)

    def field(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "dilation":
            return self.scale * x
        if self.kind == "corollary_field":
            n, r = self.dim, self.radius
            c = np.asarray(self.coeffs)
            ext = x + 0.5 * (np.sum(x * x, axis=-1, keepdims=True) - r * r) * x
            # component j: r * sum_i c_i (n delta_ij - 1) ext_j
            weight = n * c - np.sum(c)
            return self.scale * r * weight * ext
        w, _ = self._radial_profile(x)
        return self.scale * w[..., None] * x / self.radius

    def divergence(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "dilation":
            return np.full(x.shape[:-1], self.scale * x.shape[-1])
        if self.kind == "corollary_field":
            # div of the i-th field is r g_i(x)
            return self.scale * self.radius * np.sum(np.asarray(self.coeffs) * g_basis(x), axis=-1)
        w, sdw = self._radial_profile(x)
        return self.scale * (sdw + 2 * w) / self.radius

    def _radial_profile(self, x):
        """``w`` and ``s dw/ds`` for the 2D polynomial normal extension."""
        r = self.radius
        s2 = np.sum(x * x, axis=-1)
        s = np.sqrt(s2)
        th = np.arctan2(x[..., 1], x[..., 0])
        w = np.zeros_like(s)
        sdw = np.zeros_like(s)
        for k, a, b in self._modes:
            u = (s / r) ** k * (a * np.cos(k * th) + b * np.sin(k * th))
            kappa = (r * r - 2 - k) / (r * r)
            m = 1 + 0.5 * kappa * (s2 - r * r)
            w = w + u * m
            sdw = sdw + k * u * m + u * kappa * s2
        return w, sdw

    def flow(self, x, t: float):
        """Time-``t`` image of ``x`` and the log-Jacobian, by classical RK4."""
        x = np.array(x, dtype=float)
        logj = np.zeros(x.shape[:-1])
        steps = max(1, int(math.ceil(abs(t) / self.step - 1e-12)))
        h = t / steps
        for _ in range(steps):
            k1, d1 = self.field(x), self.divergence(x)
            y = x + 0.5 * h * k1
            k2, d2 = self.field(y), self.divergence(y)
            y = x + 0.5 * h * k2
            k3, d3 = self.field(y), self.divergence(y)
            y = x + h * k3
            k4, d4 = self.field(y), self.divergence(y)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            logj = logj + h / 6 * (d1 + 2 * d2 + 2 * d3 + d4)
        return x, logj


def _trig_modes(samples: np.ndarray, rel_cut: float = 1e-13):
    M = samples.size
    c = np.fft.rfft(samples) / M
    modes = []
    for k, ck in enumerate(c):
        nyq = (M % 2 == 0 and k == M // 2)
        a = (1.0 if k == 0 or nyq else 2.0) * ck.real
        b = 0.0 if k == 0 or nyq else -2.0 * ck.imag
        modes.append((k, a, b))
    top = max(max(abs(a), abs(b)) for _, a, b in modes) or 1.0
    return tuple(m for m in modes if max(abs(m[1]), abs(m[2])) > rel_cut * top)


# ---------------------------------------------------------------- perturbations

@dataclass(frozen=True, eq=False)
class NormalPerturbation:
    """Normal speed ``f`` on ``dB(0, radius)`` (or on the complement's boundary).

    Either ``g_coeffs`` (``f = sum_i c_i g_i``, any ``n >= 2``) or ``samples``
    (2D only, values on the uniform angle grid) is given. For a complement the
    exterior normal is ``-x/r``; ``f`` is always measured against that normal.
    """

    dim: int
    radius: float
    g_coeffs: Optional[tuple] = None
    samples: Optional[np.ndarray] = None
    complement: bool = False

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("perturbations live on spheres with n >= 2")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if (self.g_coeffs is None) == (self.samples is None):
            raise ValueError("give exactly one of g_coeffs and samples")
        if self.g_coeffs is not None:
            c = tuple(float(v) for v in self.g_coeffs)
            c = c + (0.0,) * (self.dim - len(c))
            if len(c) != self.dim:
                raise ValueError("too many g coefficients")
            object.__setattr__(self, "g_coeffs", c)
        else:
            if self.dim != 2:
                raise ValueError("grid samples are only supported for n = 2")
            object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    @classmethod
    def g1(cls, dim: int, radius: float, complement: bool = False, normalized: bool = True):
        f = cls(dim, radius, g_coeffs=(1.0,), complement=complement)
        return f.normalized() if normalized else f

    @classmethod
    def from_function(cls, radius: float, func: Callable, grid_size: int = 2048, complement=False):
        theta = 2 * np.pi * np.arange(grid_size) / grid_size
        return cls(2, radius, samples=np.asarray(func(theta), dtype=float), complement=complement)

    @property
    def base_set(self):
        return (BallComplement if self.complement else Ball)(self.dim, self.radius)

    @property
    def normal_sign(self) -> float:
        return -1.0 if self.complement else 1.0

    def values(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.g_coeffs is not None:
            return np.sum(np.asarray(self.g_coeffs) * g_basis(pts), axis=-1)
        th = np.arctan2(pts[..., 1], pts[..., 0])
        out = np.zeros(th.shape)
        for k, a, b in _trig_modes(self.samples):
            out = out + a * np.cos(k * th) + b * np.sin(k * th)
        return out

    def nodes(self, m: Optional[int] = None):
        if self.samples is not None and m is None:
            m = self.samples.size
        return sphere_nodes(self.dim, self.radius, m)

    def integrals(self):
        """``(int f dx, int f^2 dx)`` over the sphere."""
        if self.g_coeffs is not None:
            c = np.asarray(self.g_coeffs)
            return 0.0, float(c @ g_gram(self.dim, self.radius) @ c)
        pts, w = self.nodes()
        v = self.values(pts)
        return float(np.sum(w * v)), float(np.sum(w * v * v))

    def normalized(self) -> "NormalPerturbation":
        _, sq = self.integrals()
        if sq <= 0:
            raise ValueError("cannot normalize the zero perturbation")
        s = 1.0 / math.sqrt(sq)
        if self.g_coeffs is not None:
            return replace(self, g_coeffs=tuple(s * c for c in self.g_coeffs))
        return replace(self, samples=s * self.samples)

    def check(self, normalized: bool = True, tol: float = 1e-10):
        mean, sq = self.integrals()
        scale = max(1.0, math.sqrt(sq))
        if abs(mean) > tol * scale:
            raise ValueError(f"perturbation is not mean-zero: int f = {mean:.3e}")
        if normalized and abs(sq - 1.0) > tol:
            raise ValueError(f"perturbation is not normalized: int f^2 = {sq:.12g}")

    def flow(self) -> FlowSpec:
        """A field whose normal part on the boundary is ``f`` and which keeps
        the second measure variation at zero."""
        if self.g_coeffs is not None:
            return FlowSpec("corollary_field", self.dim, self.radius, self.g_coeffs,
                            scale=self.normal_sign)
        return FlowSpec("polynomial_normal", 2, self.radius, samples=self.samples,
                        scale=self.normal_sign)


# ---------------------------------------------------------------- reports

@dataclass(frozen=True)
class PoincareReport:
    lhs: float
    constant: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.constant if self.constant else 0.0

    @property
    def slack(self) -> float:
        return self.constant - self.lhs


@dataclass(frozen=True)
class MeasureVariation:
    first: float
    second: float


@dataclass(frozen=True)
class VariationReport:
    first_variation: float
    second_variation: float
    closed_form_bound: Optional[float]
    phase: str
    kernel_potential: Optional[Callable] = None
    terms: tuple = ()
    measure_second_residual: float = 0.0
    quadrature_error: float = 0.0
    reference: Optional[float] = None
    calibration_constant: Optional[float] = None


def phase_classify(n: int, r: float, tol: float = 1e-12) -> str:
    """Sign of ``r^2 - (n+2)``: below is locally maximal, above is not."""
    if n < 2 or r <= 0:
        raise ValueError("need n >= 2 and r > 0")
    d = r * r - (n + 2)
    if abs(d) <= tol:
        return "boundary"
    return "locally_max" if d < 0 else "not_locally_max"


def closed_form_bound(n: int, r: float) -> float:
    """``2 r^{n+1} e^{-r^2} Vol(S^{n-1}) (r^2 - n - 2) / (n (n+2) (2 pi)^n)``."""
    return (2 * r ** (n + 1) * math.exp(-r * r) * sphere_volume(n) * (r * r - n - 2)
            / (n * (n + 2) * (2 * math.pi) ** n))


# ---------------------------------------------------------------- Poincare

def poincare_ratio(f: NormalPerturbation, tol: float = 1e-10) -> PoincareReport:
    """Both sides of ``sum_i (int x_i^2 f)^2 <= 2 r^{n+3} Vol / (n(n+2)) int f^2``."""
    f.check(normalized=False, tol=tol)
    n, r = f.dim, f.radius
    _, sq = f.integrals()
    const = 2 * r ** (n + 3) * sphere_volume(n) / (n * (n + 2)) * sq
    if f.g_coeffs is not None and n > 3:
        m = _x_sq_g(n, r) @ np.asarray(f.g_coeffs)
        return PoincareReport(float(m @ m), const)
    pts, w = f.nodes()
    v = f.values(pts)
    lhs = sum(float(np.sum(w * pts[:, i] ** 2 * v)) ** 2 for i in range(n))
    return PoincareReport(lhs, const)


# ---------------------------------------------------------------- measure

def _require_ball(A):
    if not isinstance(A, (Ball, BallComplement)):
        raise TypeError("base set must be a centered ball or its complement")
    if A.dim not in (2, 3):
        raise NotImplementedError("boundary quadrature only for n = 2, 3")


def measure_variation(flow: FlowSpec, A, m: Optional[int] = None) -> MeasureVariation:
    """Boundary formulas for ``d/dt`` and ``d^2/dt^2`` of ``gamma_n(A_t)`` at 0.

    ``first = int <X,N> gamma_n``, ``second = int (div X - <X,x>) <X,N> gamma_n``.
    """
    _require_ball(A)
    pts, w = sphere_nodes(A.dim, A.radius, m)
    sign = -1.0 if isinstance(A, BallComplement) else 1.0
    X = flow.field(pts)
    XN = sign * np.sum(X * pts, axis=-1) / A.radius
    g = _gauss_density(pts)
    first = float(np.sum(w * XN * g))
    second = float(np.sum(w * (flow.divergence(pts) - np.sum(X * pts, axis=-1)) * XN * g))
    return MeasureVariation(first, second)


def _measure_along(flow: FlowSpec, A, t: float, nodes):
    pts, w = nodes
    y, logj = flow.flow(pts, t)
    inside = float(np.sum(w * _gauss_density(y) * np.exp(logj)))
    return 1.0 - inside if isinstance(A, BallComplement) else inside


def _richardson(F, h):
    f0 = F(0.0)
    v = {s: F(s) for s in (h, -h, h / 2, -h / 2)}
    d1h = (v[h] - v[-h]) / (2 * h)
    d1h2 = (v[h / 2] - v[-h / 2]) / h
    d2h = (v[h] - 2 * f0 + v[-h]) / (h * h)
    d2h2 = (v[h / 2] - 2 * f0 + v[-h / 2]) / (h * h / 4)
    return (4 * d1h2 - d1h) / 3, (4 * d2h2 - d2h) / 3


def measure_fd(flow: FlowSpec, A, h: float = 5e-3, radial: int = 24) -> MeasureVariation:
    """Richardson-extrapolated central differences of ``gamma_n(A_t)``.

    ``A_t`` is integrated by pulling back over ``A``: the flow map and its
    Jacobian come from RK4 on the field and on ``d log J/dt = div X``.
    """
    _require_ball(A)
    nodes = _ball_solid_nodes(A.dim, A.radius, radial)
    d1, d2 = _richardson(lambda t: _measure_along(flow, A, t, nodes), h)
    return MeasureVariation(d1, d2)


def measure_along_flow(flow: FlowSpec, A, t: float, radial: int = 24) -> float:
    """``gamma_n(A_t)`` by pulled-back quadrature."""
    _require_ball(A)
    return _measure_along(flow, A, t, _ball_solid_nodes(A.dim, A.radius, radial))


# ---------------------------------------------------------------- F functional

def _ball_defect(A) -> float:
    d = second_moment_defect_ball(BallSpec(A.dim, A.radius))
    return -d if isinstance(A, BallComplement) else d


def second_variation_F(f: NormalPerturbation, m: Optional[int] = None) -> VariationReport:
    """Half the second derivative of ``F(A_t) = sum_i (int_{A_t} (1 - x_i^2))^2``.

    ``sum_i (int_{dA} (1-x_i^2) f gamma_n)^2``
    ``+ 2 sum_i int_{dA} (-x_i) X_i f gamma_n * int_A (1 - y_i^2) dgamma_n``,
    with ``X`` from :meth:`NormalPerturbation.flow`. ``f`` must be mean-zero
    and normalized.
    """
    f.check(normalized=True)
    n, r = f.dim, f.radius
    A = f.base_set
    D = _ball_defect(A)
    gam = math.exp(-r * r / 2) / (2 * math.pi) ** (n / 2)
    bound = closed_form_bound(n, r)
    phase = phase_classify(n, r)
    potential = _defect_potential(n, D)
    if n > 3:
        if f.g_coeffs is None:
            raise NotImplementedError("closed forms need a g-basis perturbation")
        mom = _x_sq_g(n, r) @ np.asarray(f.g_coeffs)
        t1 = gam * gam * float(mom @ mom)
        # sum_i (-x_i) X_i = -<x, X> = -r f on the sphere (N sign absorbed in f)
        t2 = -2.0 * r * gam * D * f.integrals()[1]
        return VariationReport(0.0, t1 + t2, bound, phase, potential, (t1, t2))
    flow = f.flow()
    pts, w = f.nodes(m)
    v = f.values(pts)
    X = flow.field(pts)
    t1 = sum(float(np.sum(w * (1 - pts[:, i] ** 2) * v * gam)) ** 2 for i in range(n))
    t2 = 2.0 * D * float(np.sum(w * np.sum(-pts * X, axis=-1) * v * gam))
    first = 2.0 * D * sum(float(np.sum(w * (1 - pts[:, i] ** 2) * v * gam)) for i in range(n))
    resid = float(np.sum(w * (flow.divergence(pts) - np.sum(X * pts, axis=-1)) * v * gam))
    return VariationReport(first, t1 + t2, bound, phase, potential, (t1, t2), resid)


def _defect_potential(n, D):
    def V(x):
        x = np.asarray(x, dtype=float)
        return D * np.sum(1 - x * x, axis=-1) * _gauss_density(x)
    return V


# ---------------------------------------------------------------- noise stability

def _t_rho_ball_radial(n: int, r: float, rho: float, s):
    """``T_rho 1_{B(0,r)}`` at radius ``s`` and its radial derivative."""
    s = np.asarray(s, dtype=float)
    q = 1 - rho * rho
    lam = np.maximum(rho * rho * s * s / q, 1e-300)
    c = r * r / q
    val = stats.ncx2.cdf(c, n, lam)
    dlam = 0.5 * (stats.ncx2.cdf(c, n + 2, lam) - val)
    return val, dlam * 2 * rho * rho * s / q


def _mehler(x, y, rho):
    n = x.shape[-1]
    q = 1 - rho * rho
    e = (-np.sum(x * x, -1) - np.sum(y * y, -1) + 2 * rho * np.sum(x * y, -1)) / (2 * q)
    return np.exp(e) / (q ** (n / 2) * (2 * np.pi) ** n)


def _boundary_double_integral(kernel, pts, q, tile: int = 256):
    """``sum_{k,l} G(x_k, x_l) q_k q_l`` in fixed tiles (deterministic order)."""
    total = 0.0
    for a in range(0, len(pts), tile):
        blk = kernel(pts[a:a + tile, None, :], pts[None, :, :])
        total += float(q[a:a + tile] @ (blk @ q))
    return total


def second_variation_noise(f: NormalPerturbation, rho, m: Optional[int] = None,
                           check: bool = True) -> VariationReport:
    """Half the second derivative of noise stability ``int 1_{A_t} T_rho 1_{A_t} dgamma_n``.

    Mehler-kernel double integral over the boundary plus
    ``int_{dA} <grad T_rho 1_A, X> f gamma_n dx``. The measure's second variation
    must vanish along ``X``, which :meth:`NormalPerturbation.flow` guarantees.
    The report carries the limit ``(1/2)`` of the F variation plus the squared
    cross-moment speeds as ``reference`` and ``|value/rho^2 - reference| / sqrt|rho|``
    as ``calibration_constant``.
    """
    rho = float(rho)
    if not -1 < rho < 1:
        raise ValueError("need -1 < rho < 1")
    f.check(normalized=True)
    n, r = f.dim, f.radius
    if m is None:
        m = 512 if n == 2 else 24
    flow = f.flow()
    sign = f.normal_sign

    def evaluate(mm):
        pts, w = sphere_nodes(n, r, mm)
        v = f.values(pts)
        gam = _gauss_density(pts)
        q = w * v
        term1 = _boundary_double_integral(lambda x, y: _mehler(x, y, rho), pts, q)
        s = np.sqrt(np.sum(pts * pts, -1))
        _, dpsi = _t_rho_ball_radial(n, r, rho, s)
        grad = sign * dpsi[:, None] * pts / s[:, None]
        term2 = float(np.sum(w * np.sum(grad * flow.field(pts), -1) * v * gam))
        return term1, term2

    t1, t2 = evaluate(m)
    coarse = evaluate(m // 2)
    qerr = abs((coarse[0] + coarse[1]) - (t1 + t2))
    value = t1 + t2
    if check and qerr > 1e-8 * max(1.0, abs(value)):
        raise RuntimeError(f"boundary quadrature not converged: change {qerr:.3e} on halving")

    fvar = second_variation_F(f)
    pts, w = f.nodes()
    v = f.values(pts)
    gam = _gauss_density(pts)
    cross = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            cross += float(np.sum(w * pts[:, i] * pts[:, j] * v * gam)) ** 2
    reference = 0.5 * fvar.second_variation + cross
    calib = None
    if rho != 0:
        calib = abs(value / rho**2 - reference) / math.sqrt(abs(rho))

    def potential(x):
        x = np.asarray(x, dtype=float)
        val, _ = _t_rho_ball_radial(n, r, rho, np.sqrt(np.sum(x * x, -1)))
        val = 1 - val if f.complement else val
        return val * _gauss_density(x)

    return VariationReport(0.0, value, closed_form_bound(n, r), phase_classify(n, r),
                           potential, (t1, t2), fvar.measure_second_residual, qerr,
                           reference, calib)


# ---------------------------------------------------------------- general kernels

@dataclass(frozen=True)
class GaussianProductKernel:
    """``G(x, y) = gamma_n(x) gamma_n(y)``; its functional is ``gamma_n(A)^2``."""

    def __call__(self, x, y):
        return _gauss_density(x) * _gauss_density(y)

    def grad_x(self, x, y):
        return -x * self(x, y)[..., None]


@dataclass(frozen=True)
class MehlerKernel:
    """Density of a ``rho``-correlated standard Gaussian pair."""

    rho: float

    def __post_init__(self):
        if not -1 < self.rho < 1:
            raise ValueError("need -1 < rho < 1")

    def __call__(self, x, y):
        return _mehler(x, y, self.rho)

    def grad_x(self, x, y):
        g = _mehler(x, y, self.rho)
        return g[..., None] * (-x + self.rho * y) / (1 - self.rho**2)


@dataclass(frozen=True)
class QuadraticDefectKernel:
    """``G(x, y) = sum_i (1 - x_i^2)(1 - y_i^2) gamma_n(x) gamma_n(y)``; functional ``F``."""

    def __call__(self, x, y):
        return np.sum((1 - x * x) * (1 - y * y), -1) * _gauss_density(x) * _gauss_density(y)

    def grad_x(self, x, y):
        gx, gy = _gauss_density(x), _gauss_density(y)
        b = (1 - y * y)
        s = np.sum((1 - x * x) * b, -1)
        return (gx * gy)[..., None] * (-2 * x * b - x * s[..., None])


def _as_polar(A):
    if isinstance(A, Ball):
        if A.dim != 2:
            raise ValueError("general variations are two-dimensional")
        r = A.radius
        return StarShaped2D.from_function(lambda th: np.full_like(th, r))
    if isinstance(A, _PolarSet):
        return A
    raise TypeError("base set must be a 2D star-shaped set")


def _boundary(A: _PolarSet, M: int):
    theta = 2 * np.pi * np.arange(M) / M
    R = np.asarray(A.radius_at(theta), dtype=float)
    k = np.fft.rfftfreq(M, 1.0 / M)
    dR = np.fft.irfft(1j * k * np.fft.rfft(R), M)
    c, s = np.cos(theta), np.sin(theta)
    pts = np.stack([R * c, R * s], -1)
    tangent = np.stack([dR * c - R * s, dR * s + R * c], -1)
    # outward normal times arc-length density for a counterclockwise curve
    nds = np.stack([tangent[:, 1], -tangent[:, 0]], -1) * (2 * np.pi / M)
    return pts, nds


def general_second_variation(kernel, A, flow: FlowSpec, M: int = 512,
                             angular: int = 256, radial: int = 48) -> VariationReport:
    """Half the second derivative of ``int_{A_t} int_{A_t} G`` for a 2D star-shaped ``A``.

    ``int_{dA} int_{dA} G(x,y) <X,N>(x) <X,N>(y) + int_{dA} div(V X) <X,N>`` with
    ``V(x) = int_A G(x, y) dy`` evaluated by polar quadrature over ``A`` and
    ``div(V X) = <grad V, X> + V div X``.
    """
    P = _as_polar(A)
    pts, nds = _boundary(P, M)
    X = flow.field(pts)
    q = np.sum(X * nds, -1)
    term1 = _boundary_double_integral(kernel, pts, q)
    ynodes, yw = _polar_solid_nodes(P, angular, radial)
    V = np.empty(M)
    gV = np.empty((M, 2))
    for a in range(0, M, 64):
        xs = pts[a:a + 64, None, :]
        V[a:a + 64] = kernel(xs, ynodes[None]) @ yw
        gV[a:a + 64] = np.einsum("kpj,p->kj", kernel.grad_x(xs, ynodes[None]), yw)
    div_vx = np.sum(gV * X, -1) + V * flow.divergence(pts)
    term2 = float(np.sum(div_vx * q))
    first = 2.0 * float(np.sum(V * q))

    def potential(x):
        x = np.asarray(x, dtype=float)
        return kernel(x[..., None, :], ynodes) @ yw

    return VariationReport(first, term1 + term2, None, "", potential, (term1, term2))


def kernel_functional(kernel, A, flow: FlowSpec, t: float, angular: int = 64, radial: int = 20) -> float:
    """``int_{A_t} int_{A_t} G`` by pulling back polar quadrature nodes of ``A``."""
    P = _as_polar(A)
    pts, w = _polar_solid_nodes(P, angular, radial)
    y, logj = flow.flow(pts, t)
    ww = w * np.exp(logj)
    return _boundary_double_integral(kernel, y, ww, tile=512)


def kernel_functional_fd(kernel, A, flow: FlowSpec, h: float = 1e-2,
                         angular: int = 64, radial: int = 20):
    """Richardson finite differences: ``(d/dt, (1/2) d^2/dt^2)`` of the kernel functional."""
    d1, d2 = _richardson(lambda t: kernel_functional(kernel, A, flow, t, angular, radial), h)
    return d1, 0.5 * d2
