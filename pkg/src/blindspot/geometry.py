"""Shadow geometry for facing line-segment obstacles around a target at the origin.

Every obstacle is a chord of length ``L`` whose midpoint sits at polar
coordinates ``(r, phi)`` and which is rotated to be perpendicular to the
radius through its midpoint.  Only midpoints inside the disc of radius ``R``
are modelled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(phi: float) -> float:
    """Reduce an azimuth to [0, 2*pi)."""
    out = math.fmod(phi, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    if out >= TWO_PI:
        out = 0.0
    return out


def _wrap_array(phi: np.ndarray) -> np.ndarray:
    out = np.mod(phi, TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


def _signed_delta(phi: np.ndarray) -> np.ndarray:
    """Map angle differences to (-pi, pi]."""
    return np.pi - np.mod(np.pi - phi, TWO_PI)


@dataclass(frozen=True)
class EnvParams:
    """Environment vector: obstacle midpoint intensity, obstacle length, radius."""

    lambda0: float
    L: float
    R: float

    def __post_init__(self) -> None:
        if not (self.R > 0.0 and math.isfinite(self.R)):
            raise ValueError(f"R must be positive and finite, got {self.R}")
        if not (self.lambda0 >= 0.0 and math.isfinite(self.lambda0)):
            raise ValueError(f"lambda0 must be non-negative and finite, got {self.lambda0}")
        if not (self.L >= 0.0 and math.isfinite(self.L)):
            raise ValueError(f"L must be non-negative and finite, got {self.L}")

    @classmethod
    def normalized(cls, mean_obstacles: float, l_over_r: float, R: float = 1.0) -> "EnvParams":
        """Build from the mean obstacle count lambda0*pi*R^2 and the ratio L/R."""
        return cls(lambda0=mean_obstacles / (math.pi * R * R), L=l_over_r * R, R=R)

    @property
    def mean_obstacles(self) -> float:
        return self.lambda0 * math.pi * self.R * self.R

    @property
    def disc_area(self) -> float:
        return math.pi * self.R * self.R

    @property
    def branch_radius(self) -> float:
        """Midpoint radius beyond which the disc rim truncates the chord."""
        return math.sqrt(max(self.R * self.R - 0.25 * self.L * self.L, 0.0))

    def with_radius(self, R: float) -> "EnvParams":
        return EnvParams(self.lambda0, self.L, R)


@dataclass(frozen=True)
class PolarPoint:
    r: float
    phi: float

    def __post_init__(self) -> None:
        if self.r < 0.0:
            raise ValueError(f"radial distance must be non-negative, got {self.r}")
        object.__setattr__(self, "phi", wrap_angle(float(self.phi)))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.r * math.cos(self.phi), self.r * math.sin(self.phi))


@dataclass(frozen=True)
class Obstacle:
    mid: PolarPoint
    length: float

    @property
    def orientation(self) -> float:
        return wrap_angle(self.mid.phi + 0.5 * math.pi)

    @property
    def endpoints(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return _segment(self.mid, self.length)


@dataclass(frozen=True)
class ShadowSector:
    theta: float
    l: float
    u: float

    @property
    def wraps(self) -> bool:
        return self.l > self.u

    @property
    def interval(self) -> tuple[float, float]:
        """Span as (start, stop); stop < start means the arc passes through azimuth 0."""
        return (self.l, self.u)

    def contains(self, phi: float) -> bool:
        phi = wrap_angle(phi)
        if self.wraps:
            return phi >= self.l or phi <= self.u
        return self.l <= phi <= self.u


def _check_radius(r: float, z: EnvParams) -> None:
    if r < 0.0 or r > z.R:
        raise ValueError(f"midpoint radius {r} outside [0, {z.R}]")


def theta_array(r: np.ndarray, L: float, R: float) -> np.ndarray:
    """Vectorized shadow-sector width; no domain checks."""
    r = np.asarray(r, dtype=float)
    c = 0.5 * L
    rb2 = R * R - c * c
    inner = r * r <= rb2
    with np.errstate(divide="ignore", invalid="ignore"):
        near = 2.0 * np.arctan2(c, r)
        far = 2.0 * np.arccos(np.clip(r / R, -1.0, 1.0))
    return np.where(inner, near, far)


def chord_x_array(r: np.ndarray, L: float, R: float) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    c = 0.5 * L
    inner = r * r <= R * R - c * c
    far = 2.0 * np.sqrt(np.maximum(R * R - r * r, 0.0))
    return np.where(inner, L, far)


def shadow_area_array(r: np.ndarray, L: float, R: float) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return 0.5 * theta_array(r, L, R) * R * R - 0.5 * r * chord_x_array(r, L, R)


def theta(p: PolarPoint, z: EnvParams) -> float:
    """Angular width of the shadow cast inside the disc by the obstacle at ``p``."""
    _check_radius(p.r, z)
    return float(theta_array(p.r, z.L, z.R))


def chord_x(p: PolarPoint, z: EnvParams) -> float:
    """Length of the part of the chord that lies inside the disc."""
    _check_radius(p.r, z)
    return float(chord_x_array(p.r, z.L, z.R))


def shadow_area_single(p: PolarPoint, z: EnvParams) -> float:
    _check_radius(p.r, z)
    return float(shadow_area_array(p.r, z.L, z.R))


def sector(p: PolarPoint, z: EnvParams) -> ShadowSector:
    th = theta(p, z)
    return ShadowSector(theta=th, l=wrap_angle(p.phi - 0.5 * th), u=wrap_angle(p.phi + 0.5 * th))


def epsilon_overlap(s1: ShadowSector, s2: ShadowSector) -> float:
    """Signed azimuthal overlap width of two shadow sectors (negative when disjoint).

    The mixed branch assumes sector 1 belongs to the nearer obstacle, so that
    it is at least as wide as sector 2 and the overlap sits on one side only.
    """
    l1, u1, l2, u2 = s1.l, s1.u, s2.l, s2.u
    if l1 <= u1 and l2 <= u2:
        return min(u1, u2) - max(l1, l2)
    if l1 > u1 and l2 > u2:
        return TWO_PI - (max(l1, l2) - min(u1, u2))
    return max(u2 - l1, u1 - l2)


def alpha_overlap(p1: PolarPoint, p2: PolarPoint, z: EnvParams) -> float:
    """Fraction of the farther obstacle's shadow azimuth inside the nearer one's."""
    if p1.r > p2.r:
        raise ValueError("p1 must be the nearer obstacle (p1.r <= p2.r)")
    s2 = sector(p2, z)
    if s2.theta <= 0.0:
        return 0.0
    s1 = sector(p1, z)
    return min(1.0, max(0.0, epsilon_overlap(s1, s2) / s2.theta))


def _segment(p: PolarPoint, L: float) -> tuple[tuple[float, float], tuple[float, float]]:
    mx, my = p.xy
    tx, ty = -math.sin(p.phi), math.cos(p.phi)
    c = 0.5 * L
    return ((mx - c * tx, my - c * ty), (mx + c * tx, my + c * ty))


def obstacle_segment(p: PolarPoint, z: EnvParams) -> tuple[tuple[float, float], tuple[float, float]]:
    """Cartesian endpoints of the facing chord centred at ``p``.

    At ``r == 0`` the chord passes through the target itself; the visibility
    predicates treat that as shadowing the half-plane the chord faces.
    """
    return _segment(p, z.L)


def _orient(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segment_blocks(qx: float, qy: float, mid: PolarPoint, L: float) -> bool:
    if L <= 0.0:
        return False
    if mid.r == 0.0:
        # degenerate chord through the target: the facing half-plane is dark
        return qx * math.cos(mid.phi) + qy * math.sin(mid.phi) > 0.0
    (ax, ay), (bx, by) = _segment(mid, L)
    o1 = _orient(0.0, 0.0, qx, qy, ax, ay)
    o2 = _orient(0.0, 0.0, qx, qy, bx, by)
    o3 = _orient(ax, ay, bx, by, 0.0, 0.0)
    o4 = _orient(ax, ay, bx, by, qx, qy)
    # closed test: touching the chord or an endpoint counts as blocked
    return o1 * o2 <= 0.0 and o3 * o4 <= 0.0


def is_visible(q: PolarPoint, obstacles: Iterable[Obstacle], z: EnvParams) -> bool:
    """Line-of-sight test from the origin to ``q`` by segment intersection."""
    if q.r > z.R:
        raise ValueError(f"query radius {q.r} outside the disc of radius {z.R}")
    qx, qy = q.xy
    return not any(_segment_blocks(qx, qy, ob.mid, ob.length) for ob in obstacles)


def is_visible_sector(q: PolarPoint, obstacles: Iterable[Obstacle], z: EnvParams) -> bool:
    """Same predicate as :func:`is_visible`, evaluated in polar form."""
    if q.r > z.R:
        raise ValueError(f"query radius {q.r} outside the disc of radius {z.R}")
    for ob in obstacles:
        if ob.length <= 0.0:
            continue
        d = float(_signed_delta(np.float64(q.phi - ob.mid.phi)))
        if ob.mid.r == 0.0:
            if math.cos(d) > 0.0 and q.r > 0.0:
                return False
            continue
        half = math.atan2(0.5 * ob.length, ob.mid.r)
        if abs(d) <= half and ob.mid.r <= q.r * math.cos(d):
            return False
    return True


def blocked_matrix(
    q_r: np.ndarray,
    q_phi: np.ndarray,
    ob_r: np.ndarray,
    ob_phi: np.ndarray,
    L: float,
) -> np.ndarray:
    """Batched segment-intersection blocking test.

    Arrays broadcast against each other; the result is True where the chord
    of the obstacle blocks the sight line to the query point.
    """
    qx, qy = q_r * np.cos(q_phi), q_r * np.sin(q_phi)
    cphi, sphi = np.cos(ob_phi), np.sin(ob_phi)
    mx, my = ob_r * cphi, ob_r * sphi
    c = 0.5 * L
    ax, ay = mx + c * sphi, my - c * cphi
    bx, by = mx - c * sphi, my + c * cphi
    o1 = qx * ay - qy * ax
    o2 = qx * by - qy * bx
    o3 = (bx - ax) * (-ay) - (by - ay) * (-ax)
    o4 = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
    hit = (o1 * o2 <= 0.0) & (o3 * o4 <= 0.0)
    centre = ob_r == 0.0
    if np.any(centre):
        facing = (qx * cphi + qy * sphi) > 0.0
        hit = np.where(centre, facing, hit)
    if L <= 0.0:
        hit = np.zeros_like(hit)
    return hit


def blocked_matrix_sector(
    q_r: np.ndarray,
    q_phi: np.ndarray,
    ob_r: np.ndarray,
    ob_phi: np.ndarray,
    L: float,
) -> np.ndarray:
    """Polar-form counterpart of :func:`blocked_matrix`."""
    d = _signed_delta(q_phi - ob_phi)
    cosd = np.cos(d)
    half = np.arctan2(0.5 * L, ob_r)
    hit = (np.abs(d) <= half) & (ob_r <= q_r * cosd)
    centre = ob_r == 0.0
    if np.any(centre):
        hit = np.where(centre, (cosd > 0.0) & (q_r > 0.0), hit)
    if L <= 0.0:
        hit = np.zeros_like(hit)
    return hit


def sweep_visible_area(
    ob_r: np.ndarray,
    ob_phi: np.ndarray,
    L: float,
    R: float,
    r_in: np.ndarray | float = 0.0,
    arc_centre: np.ndarray | None = None,
    arc_half: np.ndarray | None = None,
    inside_arcs: bool = True,
) -> np.ndarray:
    """Exact visible area for a batch of scenes sharing the obstacle count.

    ``ob_r`` and ``ob_phi`` have shape (B, K).  The area counted is the part
    of the visible region with radius in (r_in, R]; when arcs are given
    (shape (B, m)) only azimuths inside (or outside) their union count.

    The integral 0.5 * int d(phi)^2 dphi is split at every azimuth where the
    nearest blocking curve can change: chord ends, rim and inner-circle
    crossings, pairwise chord-line intersections and arc ends.  On each piece
    one curve r_i*sec(phi - phi_i) or a circle is active and integrates in
    closed form.
    """
    ob_r = np.atleast_2d(np.asarray(ob_r, dtype=float))
    ob_phi = np.atleast_2d(np.asarray(ob_phi, dtype=float))
    B, K = ob_r.shape
    r_in = np.broadcast_to(np.asarray(r_in, dtype=float), (B,))
    c = 0.5 * L

    if K == 0 or L <= 0.0:
        base = 0.5 * (R * R - r_in * r_in)
        if arc_centre is None:
            return base * TWO_PI
        frac = _arc_union_measure(np.atleast_2d(arc_centre), np.atleast_2d(arc_half))
        span = frac if inside_arcs else TWO_PI - frac
        return base * span

    half = np.arctan2(c, ob_r)
    rim = np.arccos(np.clip(ob_r / R, -1.0, 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.arccos(np.clip(np.where(r_in[:, None] > 0, ob_r / r_in[:, None], 1.0), -1.0, 1.0))
    pieces = [ob_phi - half, ob_phi + half, ob_phi - rim, ob_phi + rim, ob_phi - inner, ob_phi + inner]
    if K > 1:
        i, j = np.triu_indices(K, 1)
        ri, rj = ob_r[:, i], ob_r[:, j]
        pi_, pj = ob_phi[:, i], ob_phi[:, j]
        det = np.sin(pj - pi_)
        ok = np.abs(det) > 1e-15
        safe = np.where(ok, det, 1.0)
        x = (ri * np.sin(pj) - rj * np.sin(pi_)) / safe
        y = (rj * np.cos(pi_) - ri * np.cos(pj)) / safe
        pieces.append(np.where(ok, np.arctan2(y, x), 0.0))
    if arc_centre is not None:
        ac = np.atleast_2d(arc_centre)
        ah = np.atleast_2d(arc_half)
        pieces += [ac - ah, ac + ah]
    bp = _wrap_array(np.concatenate(pieces, axis=1))
    bp = np.sort(bp, axis=1)
    bp = np.concatenate([np.zeros((B, 1)), bp, np.full((B, 1), TWO_PI)], axis=1)
    lo, hi = bp[:, :-1], bp[:, 1:]
    width = hi - lo
    mid = 0.5 * (lo + hi)

    # distance to the first blocking chord along each piece's mid-azimuth
    d = _signed_delta(mid[:, :, None] - ob_phi[:, None, :])
    rk = ob_r[:, None, :]
    active = np.abs(d) < half[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.where(active, rk / np.cos(d), np.inf)
    k_best = np.argmin(dist, axis=2)
    d_best = np.take_along_axis(dist, k_best[:, :, None], axis=2)[:, :, 0]
    obstacle_wins = d_best < R
    dmid = np.minimum(d_best, R)

    r_best = np.take_along_axis(ob_r, k_best, axis=1)
    delta_mid = np.take_along_axis(d, k_best[:, :, None], axis=2)[:, :, 0]
    with np.errstate(invalid="ignore", over="ignore"):
        tan_part = np.tan(delta_mid + 0.5 * width) - np.tan(delta_mid - 0.5 * width)
        curve_area = np.where(r_best > 0.0, 0.5 * r_best * r_best * tan_part, 0.0)
    piece = np.where(obstacle_wins, curve_area, 0.5 * R * R * width)
    piece = np.where(dmid > r_in[:, None], piece - 0.5 * (r_in * r_in)[:, None] * width, 0.0)

    if arc_centre is not None:
        dd = _signed_delta(mid[:, :, None] - np.atleast_2d(arc_centre)[:, None, :])
        in_arc = np.any(np.abs(dd) <= np.atleast_2d(arc_half)[:, None, :], axis=2)
        piece = np.where(in_arc if inside_arcs else ~in_arc, piece, 0.0)
    return np.sum(np.where(width > 0.0, piece, 0.0), axis=1)


def _arc_union_measure(centre: np.ndarray, half: np.ndarray) -> np.ndarray:
    bp = _wrap_array(np.concatenate([centre - half, centre + half], axis=1))
    B = bp.shape[0]
    bp = np.concatenate([np.zeros((B, 1)), np.sort(bp, axis=1), np.full((B, 1), TWO_PI)], axis=1)
    mid = 0.5 * (bp[:, :-1] + bp[:, 1:])
    dd = _signed_delta(mid[:, :, None] - centre[:, None, :])
    inside = np.any(np.abs(dd) <= half[:, None, :], axis=2)
    return np.sum(np.where(inside, np.diff(bp, axis=1), 0.0), axis=1)


def exact_visible_area(obstacles: Sequence[Obstacle], z: EnvParams) -> float:
    """Visible area of the disc for one realization of facing obstacles."""
    for ob in obstacles:
        if ob.mid.r > z.R:
            raise ValueError("obstacle midpoint outside the disc")
    if not obstacles:
        return z.disc_area
    r = np.array([[ob.mid.r for ob in obstacles]])
    phi = np.array([[ob.mid.phi for ob in obstacles]])
    return float(sweep_visible_area(r, phi, z.L, z.R)[0])


def make_obstacles(r: Sequence[float], phi: Sequence[float], z: EnvParams) -> list[Obstacle]:
    return [Obstacle(PolarPoint(float(a), float(b)), z.L) for a, b in zip(r, phi)]
