"""Closed forms and quadrature for the blind-spot probability.

The anchor process is Poisson, so given a visible area ``t`` the target is
blind with probability ``g(t)``, the Poisson lower tail below ``kv``.  The
rest of this module averages ``g`` (or its argument) over obstacle layouts:
the independent-blocking value uses the mean visible area, and the
nearest-two-obstacle value keeps the joint law of the two nearest midpoints
and replaces everything farther out by its conditional mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .geometry import (
    TWO_PI,
    EnvParams,
    PolarPoint,
    alpha_overlap,
    chord_x_array,
    shadow_area_array,
    theta,
    theta_array,
)

T0_CONSTANT = 3.3836


@dataclass(frozen=True)
class BlindSpotParams:
    lam: float
    z: EnvParams
    kv: int = 3

    def __post_init__(self) -> None:
        if not (self.lam >= 0.0 and math.isfinite(self.lam)):
            raise ValueError(f"anchor intensity must be non-negative, got {self.lam}")
        if int(self.kv) != self.kv or self.kv < 1:
            raise ValueError(f"kv must be a positive integer, got {self.kv}")

    @classmethod
    def normalized(cls, mean_anchors: float, z: EnvParams, kv: int = 3) -> "BlindSpotParams":
        return cls(lam=mean_anchors / z.disc_area, z=z, kv=kv)


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-5
    max_depth: int = 3

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


DEFAULT_QUADRATURE = QuadratureSpec()


# --------------------------------------------------------------------------
# conditional blind-spot probability

def g(t, lam: float, kv: int = 3):
    """P(fewer than kv Poisson(lam*t) anchors)."""
    out = special.pdtr(kv - 1, lam * np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def g_integral(t, lam: float, kv: int = 3):
    """Antiderivative of ``g`` in ``t``, zero at ``t = 0``."""
    x = lam * np.asarray(t, dtype=float)
    total = sum(special.gammainc(k + 1, x) for k in range(kv))
    return total / lam


def _mean_g(a, b, lam: float, kv: int):
    """Average of g over [min(a,b), max(a,b)]; midpoint value for tiny spans."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    span = b - a
    small = np.abs(span) * lam < 1e-6
    safe = np.where(small, 1.0, span)
    avg = (g_integral(b, lam, kv) - g_integral(a, lam, kv)) / safe
    return np.where(small, g(0.5 * (a + b), lam, kv), avg)


def g_derivatives(t: float, lam: float) -> tuple[float, float]:
    """First and second t-derivatives of g for kv = 3."""
    e = math.exp(-lam * t)
    first = -(lam ** 3 / 2.0) * t * t * e
    second = (lam ** 3 / 2.0) * t * e * (lam * t - 2.0)
    return first, second


def _tangency_residual(u: float) -> float:
    return math.exp(-u) * (u ** 3 / 2.0 + u ** 2 / 2.0 + u + 1.0) - 1.0


def solve_t0(lam: float) -> float:
    """Area where the tangent of g through (0, 1) touches g (kv = 3)."""
    if not lam > 0.0:
        raise ValueError(f"anchor intensity must be positive, got {lam}")
    u = optimize.brentq(_tangency_residual, 2.0, 20.0, xtol=1e-14, rtol=1e-15)
    return u / lam


# --------------------------------------------------------------------------
# blocking-midpoint region and visibility probability

def _int_rho_atan(a, c: float):
    """int_0^a rho*arctan(c/rho) drho."""
    a = np.asarray(a, dtype=float)
    if c <= 0.0:
        return np.zeros_like(a)
    return 0.5 * a * a * np.arctan2(c, a) + 0.5 * c * (a - c * np.arctan2(a, c))


def _int_rho_acos(a, r):
    """int_0^a rho*arccos(rho/r) drho for 0 <= a <= r."""
    a = np.asarray(a, dtype=float)
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.clip(np.where(r > 0, a / r, 0.0), 0.0, 1.0)
    return r * r * (0.5 * s * s * np.arccos(s) + 0.25 * (np.arcsin(s) - s * np.sqrt(1.0 - s * s)))


def _blocking_moment(a, r, c: float):
    """int_0^a rho*min(arctan(c/rho), arccos(rho/r)) drho.

    The two branches cross at rho = sqrt(r^2 - c^2); below it the arctan
    branch is the smaller one.
    """
    a = np.asarray(a, dtype=float)
    r = np.asarray(r, dtype=float)
    cross = np.sqrt(np.maximum(r * r - c * c, 0.0))
    low = np.minimum(a, cross)
    tail = np.where(a > cross, _int_rho_acos(a, r) - _int_rho_acos(cross, r), 0.0)
    return _int_rho_atan(low, c) + tail


def _nu2_closed(r, L: float):
    return 2.0 * _blocking_moment(r, r, 0.5 * L)


def _nu2_quad(r: float, L: float, rel_tol: float) -> float:
    if r <= 0.0 or L <= 0.0:
        return 0.0
    c = 0.5 * L

    def f(rho: float) -> float:
        if rho == 0.0:
            return 0.0
        return rho * min(math.atan(c / rho), math.acos(min(rho / r, 1.0)))

    cross = math.sqrt(max(r * r - c * c, 0.0))
    parts = [0.0] + ([cross] if 0.0 < cross < r else []) + [r]
    total = 0.0
    for lo, hi in zip(parts[:-1], parts[1:]):
        val, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=rel_tol, limit=200)
        total += val
    return 2.0 * total


def nu2_SV(q: PolarPoint, z: EnvParams, method: str = "closed") -> float:
    """Area of the set of midpoints whose chord blocks the sight line to ``q``.

    ``method="closed"`` uses the antiderivatives of both branches;
    ``method="quad"`` integrates numerically with a split at the branch
    crossing.
    """
    if q.r < 0.0 or q.r > z.R:
        raise ValueError(f"query radius {q.r} outside [0, {z.R}]")
    if method == "closed":
        return float(_nu2_closed(q.r, z.L))
    if method == "quad":
        return _nu2_quad(q.r, z.L, 1e-11)
    raise ValueError(f"unknown method {method!r}")


def visibility_probability(r, z: EnvParams):
    """P(a point at radius r is visible) = exp(-lambda0 * nu2)."""
    return np.exp(-z.lambda0 * _nu2_closed(r, z.L))


def mean_visible_area(z: EnvParams, rel_tol: float = 1e-10) -> float:
    """E[A_v] = 2*pi * int_0^R P(visible at r) r dr."""
    if z.lambda0 == 0.0 or z.L == 0.0:
        return z.disc_area
    c = 0.5 * z.L
    pts = [p for p in (c, z.branch_radius) if 0.0 < p < z.R]
    val, _ = integrate.quad(
        lambda r: float(visibility_probability(r, z)) * r,
        0.0,
        z.R,
        points=pts or None,
        epsabs=0.0,
        epsrel=rel_tol,
        limit=200,
    )
    return TWO_PI * val


def b_ind(bp: BlindSpotParams) -> float:
    """Blind-spot probability if anchors were blocked independently."""
    if bp.lam == 0.0:
        return 1.0
    return g(mean_visible_area(bp.z), bp.lam, bp.kv)


# --------------------------------------------------------------------------
# nearest-two-obstacle pieces

def _check_pair(p1: PolarPoint, p2: PolarPoint, z: EnvParams) -> None:
    if not (0.0 <= p1.r <= p2.r <= z.R):
        raise ValueError(f"need 0 <= r1 <= r2 <= R, got r1={p1.r}, r2={p2.r}, R={z.R}")


def _A_n2_array(r1, r2, L: float):
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    shadow = 0.5 * theta_array(r1, L, r2) * r2 * r2 - 0.5 * chord_x_array(r1, L, r2) * r1
    return math.pi * r2 * r2 - shadow


def A_n2(p1: PolarPoint, p2: PolarPoint, z: EnvParams) -> float:
    """Visible area inside the disc of radius r2 (only the nearest obstacle blocks there)."""
    _check_pair(p1, p2, z)
    if p2.r == 0.0:
        return 0.0
    return float(_A_n2_array(p1.r, p2.r, z.L))


def _far_visibility(r, r2, z: EnvParams):
    """P(visible at r) when blockers are restricted to radii beyond r2."""
    c = 0.5 * z.L
    moment = _blocking_moment(r, r, c) - _blocking_moment(r2, r, c)
    return np.exp(-2.0 * z.lambda0 * np.maximum(moment, 0.0))


def far_radial_integral(r2: float, z: EnvParams, rel_tol: float = 1e-10) -> float:
    """int_{r2}^R P(visible at r | no blockers inside r2) r dr."""
    if r2 >= z.R:
        return 0.0
    if z.lambda0 == 0.0 or z.L == 0.0:
        return 0.5 * (z.R * z.R - r2 * r2)
    c = 0.5 * z.L
    pts = [p for p in (c, math.sqrt(r2 * r2 + c * c), z.branch_radius) if r2 < p < z.R]
    val, _ = integrate.quad(
        lambda r: float(_far_visibility(r, r2, z)) * r,
        r2,
        z.R,
        points=pts or None,
        epsabs=0.0,
        epsrel=rel_tol,
        limit=200,
    )
    return val


def out_span(p1: PolarPoint, p2: PolarPoint, z: EnvParams) -> float:
    """Azimuthal width left outside both shadow sectors."""
    return TWO_PI - theta(p1, z) - (1.0 - alpha_overlap(p1, p2, z)) * theta(p2, z)


def mean_Vout_area(p1: PolarPoint, p2: PolarPoint, z: EnvParams) -> float:
    """Expected visible area beyond r2 outside both sectors, given the nearest two."""
    _check_pair(p1, p2, z)
    if p2.r >= z.R:
        return 0.0
    return out_span(p1, p2, z) * far_radial_integral(p2.r, z)


def Av_2plus(p1: PolarPoint, p2: PolarPoint, z: EnvParams) -> float:
    return A_n2(p1, p2, z) + mean_Vout_area(p1, p2, z)


# --------------------------------------------------------------------------
# blind-spot probability with zero or one obstacle

def b0(bp: BlindSpotParams) -> float:
    return g(bp.z.disc_area, bp.lam, bp.kv)


def b1(bp: BlindSpotParams, rel_tol: float = 1e-10) -> float:
    """Blind-spot probability given exactly one uniformly placed obstacle."""
    z = bp.z
    if bp.lam == 0.0:
        return 1.0
    if z.L == 0.0:
        return b0(bp)
    pts = [p for p in (z.branch_radius,) if 0.0 < p < z.R]
    val, _ = integrate.quad(
        lambda r: g(z.disc_area - float(shadow_area_array(r, z.L, z.R)), bp.lam, bp.kv) * r,
        0.0,
        z.R,
        points=pts or None,
        epsabs=1e-14,
        epsrel=rel_tol,
        limit=200,
    )
    return 2.0 * val / (z.R * z.R)


# --------------------------------------------------------------------------
# tensor Gauss-Legendre machinery for the (r1, r2) integrals

_GL_ORDER = 16


def _gauss_panels(a: np.ndarray, b: np.ndarray, splits: list[np.ndarray], m: int, n: int = _GL_ORDER):
    """Composite Gauss-Legendre nodes/weights on [a, b] per row, split at given points."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cols = [a] + [np.clip(np.broadcast_to(s, a.shape), a, b) for s in splits] + [b]
    edges = np.sort(np.stack(cols, axis=-1), axis=-1)
    lo_p, hi_p = edges[..., :-1], edges[..., 1:]
    frac = np.arange(m + 1) / m
    sub = lo_p[..., None] + (hi_p - lo_p)[..., None] * frac
    lo = sub[..., :-1].reshape(*a.shape, -1)
    hi = sub[..., 1:].reshape(*a.shape, -1)
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[..., None] + half[..., None] * x
    weights = half[..., None] * w
    return nodes.reshape(*a.shape, -1), weights.reshape(*a.shape, -1)


def _far_radial_vec(r2: np.ndarray, z: EnvParams, m: int, chunk: int = 8192) -> np.ndarray:
    r2 = np.asarray(r2, dtype=float).ravel()
    if z.lambda0 == 0.0 or z.L == 0.0:
        return 0.5 * (z.R * z.R - r2 * r2)
    c = 0.5 * z.L
    out = np.empty_like(r2)
    R = np.full_like(r2, z.R)
    for s in range(0, r2.size, chunk):
        a = r2[s:s + chunk]
        splits = [np.full_like(a, c), np.sqrt(a * a + c * c), np.full_like(a, z.branch_radius)]
        nodes, weights = _gauss_panels(a, R[s:s + chunk], splits, m)
        vals = _far_visibility(nodes, a[:, None], z) * nodes
        out[s:s + chunk] = np.sum(vals * weights, axis=1)
    return out


@dataclass(frozen=True)
class _PairGrid:
    """lambda-independent data on the (r1, r2) quadrature grid.

    For each node the azimuthal offset between the two midpoints is
    integrated in closed form: the visible-area proxy is piecewise linear in
    that offset (constant while the farther sector nests inside the nearer,
    linear while they partially overlap, constant once disjoint).
    """

    weight: np.ndarray
    area_nested: np.ndarray
    area_disjoint: np.ndarray
    len_nested: np.ndarray
    len_partial: np.ndarray
    len_disjoint: np.ndarray

    def expect_g(self, lam: float, kv: int) -> float:
        j = (
            self.len_nested * g(self.area_nested, lam, kv)
            + self.len_partial * _mean_g(self.area_disjoint, self.area_nested, lam, kv)
            + self.len_disjoint * g(self.area_disjoint, lam, kv)
        )
        return float(np.sum(self.weight * j))

    def expect_area(self) -> float:
        j = (
            self.len_nested * self.area_nested
            + self.len_partial * 0.5 * (self.area_nested + self.area_disjoint)
            + self.len_disjoint * self.area_disjoint
        )
        return float(np.sum(self.weight * j))

    def mass(self) -> float:
        return float(np.sum(self.weight * (self.len_nested + self.len_partial + self.len_disjoint)))


@lru_cache(maxsize=64)
def _pair_grid(z: EnvParams, m: int) -> _PairGrid:
    R, L, lam0 = z.R, z.L, z.lambda0
    c = 0.5 * L
    rb = z.branch_radius
    outer_splits = [np.array(rb), np.array(c), np.array(math.sqrt(max(R * R - 2.0 * c * c, 0.0)))]
    r1, w1 = _gauss_panels(np.array(0.0), np.array(R), outer_splits, m)
    r1 = r1.ravel()
    w1 = w1.ravel()
    Rv = np.full_like(r1, R)
    inner_splits = [np.full_like(r1, rb), np.full_like(r1, c), np.sqrt(r1 * r1 + c * c)]
    r2, w2 = _gauss_panels(r1, Rv, inner_splits, m)
    r1b = np.broadcast_to(r1[:, None], r2.shape)

    th1 = theta_array(r1b, L, R)
    th2 = theta_array(r2, L, R)
    a = 0.5 * th1
    b = np.minimum(0.5 * th2, a)
    an2 = _A_n2_array(r1b, r2, L)
    far = _far_radial_vec(r2, z, m).reshape(r2.shape)
    area_nested = an2 + far * (TWO_PI - th1)
    area_disjoint = an2 + far * (TWO_PI - th1 - 2.0 * b)
    weight = (w1[:, None] * w2) * TWO_PI * r1b * lam0 * lam0 * np.exp(-lam0 * math.pi * r2 * r2) * r2
    return _PairGrid(
        weight=weight.ravel(),
        area_nested=area_nested.ravel(),
        area_disjoint=area_disjoint.ravel(),
        len_nested=(2.0 * (a - b)).ravel(),
        len_partial=(4.0 * b).ravel(),
        len_disjoint=(2.0 * (math.pi - a - b)).ravel(),
    )


def _converge(evaluate, quad: QuadratureSpec, relative: bool = False) -> float:
    prev = evaluate(1)
    m = 1
    for _ in range(quad.max_depth):
        m *= 2
        cur = evaluate(m)
        err = abs(cur - prev)
        tol = quad.abs_tol * (abs(cur) if relative else 1.0)
        if err <= tol:
            return cur
        prev = cur
    return cur


def pair_term(bp: BlindSpotParams, quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Contribution of layouts with at least two obstacles to b_2plus."""
    z = bp.z
    if z.lambda0 == 0.0:
        return 0.0
    if bp.lam == 0.0:
        return prob_at_least_two(z)
    return _converge(lambda m: _pair_grid(z, m).expect_g(bp.lam, bp.kv), quad)


def prob_at_least_two(z: EnvParams) -> float:
    mu = z.mean_obstacles
    return -math.expm1(-mu) - mu * math.exp(-mu)


def b_2plus(bp: BlindSpotParams, quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Nearest-two-obstacle approximation of the blind-spot probability."""
    if bp.lam == 0.0:
        return 1.0
    mu = bp.z.mean_obstacles
    p0 = math.exp(-mu)
    head = b0(bp) * p0
    if mu > 0.0:
        head += b1(bp) * p0 * mu
    return head + pair_term(bp, quad)


def mean_Av_given_K2(z: EnvParams, quad: QuadratureSpec = QuadratureSpec(abs_tol=1e-7)) -> float:
    """E[A_v | at least two obstacles] under the nearest-two approximation."""
    if z.lambda0 <= 0.0:
        raise ValueError("conditioning on two obstacles needs lambda0 > 0")
    p = prob_at_least_two(z)
    if p <= 0.0:
        raise ValueError("probability of two or more obstacles underflows")
    return _converge(lambda m: _pair_grid(z, m).expect_area(), quad, relative=True) / p


def density_sum_check(r1: float, r2: float, z: EnvParams) -> tuple[float, float]:
    """Sum the order-statistic densities over k and compare with the collapsed kernel.

    Returns (series value, lambda0^2 * exp(-lambda0*pi*r2^2)).
    """
    R = z.R
    if not (0.0 <= r1 <= r2 <= R) or r1 >= R:
        raise ValueError("need 0 <= r1 <= r2 <= R and r1 < R")
    mu = z.mean_obstacles
    rhs = z.lambda0 ** 2 * math.exp(-z.lambda0 * math.pi * r2 * r2)
    if mu == 0.0:
        return 0.0, rhs
    area = math.pi * R * R
    q1 = (R * R - r1 * r1) / (R * R)
    q21 = (R * R - r2 * r2) / (R * R - r1 * r1)
    total = 0.0
    k = 2
    while True:
        f1 = k / area * q1 ** (k - 1)
        f21 = (k - 1) / (math.pi * (R * R - r1 * r1)) * q21 ** (k - 2)
        log_pois = -mu + k * math.log(mu) - math.lgamma(k + 1)
        term = f1 * f21 * math.exp(log_pois)
        total += term
        # terms decay geometrically once k exceeds mu; stop when negligible
        if k > mu + 10 and term < 1e-18 * max(total, 1e-300):
            break
        if k > 10000:
            break
        k += 1
    return total, rhs
