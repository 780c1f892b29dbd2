"""Monte-Carlo ground truth for the blind-spot probability and visible areas.

Replication ``i`` draws everything from the counter-based substream
``(seed, i)``.  Point ``j`` of a process always uses slot ``j`` of its
stream, and Poisson counts come from inverting one uniform, so raising an
intensity only ever adds points to a replication.  Estimates with a common
seed are therefore coupled across parameter values.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np
from scipy import stats

from . import rng
from .analytic import BlindSpotParams, _A_n2_array, g
from .geometry import (
    EnvParams,
    Obstacle,
    PolarPoint,
    blocked_matrix,
    blocked_matrix_sector,
    sweep_visible_area,
    theta_array,
)

CHUNK = 2048
WORKERS_ENV = "BLINDSPOT_WORKERS"


@dataclass(frozen=True)
class Scene:
    obstacles: list[Obstacle]
    anchors: list[PolarPoint]
    seed: int
    rep: int


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int
    seed: int

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        return (self.mean - k * self.stderr, self.mean + k * self.stderr)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    total: int

    @property
    def centres(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def mean(self) -> float:
        return float(np.sum(self.centres * self.counts) / self.total)

    def blind_probability(self, lam: float, kv: int = 3) -> float:
        """Riemann sum of g against the bin masses."""
        return float(np.sum(g(self.centres, lam, kv) * self.counts) / self.total)


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _estimate(values: np.ndarray, seed: int) -> Estimate:
    n = values.size
    if n < 2:
        raise ValueError("need at least two replications for a standard error")
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(n))
    return Estimate(mean, stderr, n, seed)


def _run_chunks(fn: Callable[[np.ndarray], np.ndarray], n: int, workers: int | None) -> np.ndarray:
    """Evaluate ``fn`` on fixed replication chunks and concatenate in index order."""
    if n < 1:
        raise ValueError("n must be positive")
    workers = default_workers() if workers is None else workers
    chunks = [np.arange(s, min(s + CHUNK, n), dtype=np.int64) for s in range(0, n, CHUNK)]
    if workers <= 1 or len(chunks) == 1:
        parts = [fn(c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, chunks))
    return np.concatenate(parts)


# --------------------------------------------------------------------------
# sampling

def _poisson_counts(u: np.ndarray, mean: float) -> np.ndarray:
    if mean <= 0.0:
        return np.zeros(u.shape, dtype=np.int64)
    return stats.poisson.ppf(u, mean).astype(np.int64)


def _disc_points(seed: int, reps: np.ndarray, kmax: int, R: float, s_r: int, s_phi: int):
    slots = np.arange(kmax)
    r = R * np.sqrt(rng.uniforms(seed, reps[:, None], s_r, slots[None, :]))
    phi = 2.0 * math.pi * rng.uniforms(seed, reps[:, None], s_phi, slots[None, :])
    return r, phi


def _obstacle_counts(seed: int, reps: np.ndarray, z: EnvParams, at_least: int = 0) -> np.ndarray:
    u = rng.uniforms(seed, reps, rng.OBSTACLE_COUNT, 0)
    mu = z.mean_obstacles
    if at_least > 0:
        # inverse-CDF draw from the count law conditioned on >= at_least
        floor = stats.poisson.cdf(at_least - 1, mu)
        u = floor + u * (1.0 - floor)
        return np.maximum(_poisson_counts(u, mu), at_least)
    return _poisson_counts(u, mu)


def _anchor_counts(seed: int, reps: np.ndarray, lam: float, z: EnvParams) -> np.ndarray:
    u = rng.uniforms(seed, reps, rng.ANCHOR_COUNT, 0)
    return _poisson_counts(u, lam * z.disc_area)


def sample_scene(z: EnvParams, lam: float, stream: rng.Substream) -> Scene:
    """Draw the replication of ``stream`` exactly as the estimators see it."""
    reps = np.array([stream.rep], dtype=np.int64)
    k = int(_obstacle_counts(stream.seed, reps, z)[0])
    m = int(_anchor_counts(stream.seed, reps, lam, z)[0])
    orr, ophi = _disc_points(stream.seed, reps, k, z.R, rng.OBSTACLE_R, rng.OBSTACLE_PHI)
    arr, aphi = _disc_points(stream.seed, reps, m, z.R, rng.ANCHOR_R, rng.ANCHOR_PHI)
    obstacles = [Obstacle(PolarPoint(float(a), float(b)), z.L) for a, b in zip(orr[0], ophi[0])]
    anchors = [PolarPoint(float(a), float(b)) for a, b in zip(arr[0], aphi[0])]
    return Scene(obstacles, anchors, stream.seed, stream.rep)


def is_blind(scene: Scene, kv: int = 3, predicate: str = "segment") -> bool:
    """Fewer than ``kv`` anchors have line of sight to the target."""
    if not scene.anchors:
        return True
    if not scene.obstacles:
        return len(scene.anchors) < kv
    test = blocked_matrix if predicate == "segment" else blocked_matrix_sector
    qr = np.array([a.r for a in scene.anchors])[:, None]
    qp = np.array([a.phi for a in scene.anchors])[:, None]
    lengths = {ob.length for ob in scene.obstacles}
    blocked = np.zeros(len(scene.anchors), dtype=bool)
    for L in lengths:
        sel = [ob for ob in scene.obstacles if ob.length == L]
        orr = np.array([ob.mid.r for ob in sel])[None, :]
        oph = np.array([ob.mid.phi for ob in sel])[None, :]
        blocked |= test(qr, qp, orr, oph, L).any(axis=1)
    return int(np.count_nonzero(~blocked)) < kv


# --------------------------------------------------------------------------
# blind-spot probability

def _blind_chunk(reps: np.ndarray, seed: int, bp: BlindSpotParams, predicate: str) -> np.ndarray:
    z = bp.z
    k = _obstacle_counts(seed, reps, z)
    m = _anchor_counts(seed, reps, bp.lam, z)
    kmax, mmax = int(k.max(initial=0)), int(m.max(initial=0))
    if mmax == 0:
        return np.ones(reps.size)
    arr, aphi = _disc_points(seed, reps, mmax, z.R, rng.ANCHOR_R, rng.ANCHOR_PHI)
    anchor_ok = np.arange(mmax)[None, :] < m[:, None]
    if kmax == 0 or z.L == 0.0:
        visible = anchor_ok
    else:
        orr, ophi = _disc_points(seed, reps, kmax, z.R, rng.OBSTACLE_R, rng.OBSTACLE_PHI)
        obst_ok = np.arange(kmax)[None, :] < k[:, None]
        test = blocked_matrix if predicate == "segment" else blocked_matrix_sector
        hit = test(arr[:, :, None], aphi[:, :, None], orr[:, None, :], ophi[:, None, :], z.L)
        visible = anchor_ok & ~np.any(hit & obst_ok[:, None, :], axis=2)
    return (np.count_nonzero(visible, axis=1) < bp.kv).astype(float)


def blind_indicators(
    bp: BlindSpotParams, n: int, seed: int, workers: int | None = None, predicate: str = "segment"
) -> np.ndarray:
    return _run_chunks(partial(_blind_chunk, seed=seed, bp=bp, predicate=predicate), n, workers)


def estimate_b(bp: BlindSpotParams, n: int, seed: int, workers: int | None = None) -> Estimate:
    """Fraction of simulated scenes in which the target is blind."""
    return _estimate(blind_indicators(bp, n, seed, workers), seed)


# --------------------------------------------------------------------------
# visible-area statistics

def _sorted_obstacles(seed: int, reps: np.ndarray, z: EnvParams, k: int):
    r, phi = _disc_points(seed, reps, k, z.R, rng.OBSTACLE_R, rng.OBSTACLE_PHI)
    order = np.argsort(r, axis=1, kind="stable")
    return np.take_along_axis(r, order, axis=1), np.take_along_axis(phi, order, axis=1)


def _by_count(reps: np.ndarray, counts: np.ndarray, fn: Callable[[np.ndarray, int], np.ndarray]) -> np.ndarray:
    """Apply ``fn(rep_subset, k)`` to groups of equal obstacle count, preserving order."""
    out = np.empty(reps.size)
    for k in np.unique(counts):
        sel = counts == k
        out[sel] = fn(reps[sel], int(k))
    return out


def _area_chunk(reps: np.ndarray, seed: int, z: EnvParams) -> np.ndarray:
    counts = _obstacle_counts(seed, reps, z)

    def one(sub: np.ndarray, k: int) -> np.ndarray:
        if k == 0:
            return np.full(sub.size, z.disc_area)
        r, phi = _disc_points(seed, sub, k, z.R, rng.OBSTACLE_R, rng.OBSTACLE_PHI)
        return sweep_visible_area(r, phi, z.L, z.R)

    return _by_count(reps, counts, one)


def visible_areas(z: EnvParams, n: int, seed: int, workers: int | None = None) -> np.ndarray:
    """Exact visible area of each of ``n`` replications."""
    return _run_chunks(partial(_area_chunk, seed=seed, z=z), n, workers)


def estimate_Av_histogram(z: EnvParams, n: int, bins: int, seed: int, workers: int | None = None) -> Histogram:
    if bins < 1:
        raise ValueError("bins must be at least 1")
    areas = visible_areas(z, n, seed, workers)
    edges = np.linspace(0.0, z.disc_area, bins + 1)
    counts, _ = np.histogram(np.clip(areas, 0.0, z.disc_area), bins=edges)
    return Histogram(edges=edges, counts=counts, total=int(areas.size))


def _far_split_chunk(reps: np.ndarray, seed: int, z: EnvParams, kind: str) -> np.ndarray:
    counts = _obstacle_counts(seed, reps, z, at_least=2)

    def one(sub: np.ndarray, k: int) -> np.ndarray:
        r, phi = _sorted_obstacles(seed, sub, z, k)
        if kind in ("visible", "shadow"):
            a_v = sweep_visible_area(r, phi, z.L, z.R)
            if kind == "visible":
                a_f = a_v - _A_n2_array(r[:, 0], r[:, 1], z.L)
                return a_f / a_v
            shadow_all = z.disc_area - a_v
            shadow_near = z.disc_area - sweep_visible_area(r[:, :2], phi[:, :2], z.L, z.R)
            with np.errstate(invalid="ignore", divide="ignore"):
                frac = (shadow_all - shadow_near) / shadow_all
            return np.where(shadow_all > 0.0, np.clip(frac, 0.0, 1.0), 0.0)
        half = 0.5 * theta_array(r[:, :2], z.L, z.R)
        return sweep_visible_area(
            r, phi, z.L, z.R, r_in=r[:, 1], arc_centre=phi[:, :2], arc_half=half, inside_arcs=(kind == "in")
        )

    return _by_count(reps, counts, one)


def estimate_gamma(
    z: EnvParams, n: int, seed: int, workers: int | None = None, definition: str = "visible"
) -> Estimate:
    """Average share attributable to obstacles beyond the nearest two (scenes with k >= 2).

    ``definition="visible"`` (default): E[A_f / A_v], the visible area
    beyond the second-nearest midpoint radius over the whole visible area.
    ``definition="shadow"``: the share of the shadowed area that the far
    obstacles add on top of the nearest two.
    """
    if definition not in ("shadow", "visible"):
        raise ValueError(f"unknown definition {definition!r}")
    vals = _run_chunks(partial(_far_split_chunk, seed=seed, z=z, kind=definition), n, workers)
    return _estimate(vals, seed)


def estimate_Vin_area(z: EnvParams, n: int, seed: int, workers: int | None = None) -> Estimate:
    """Mean visible area beyond r2 inside the azimuth span of the two nearest shadows (k >= 2)."""
    return _estimate(_run_chunks(partial(_far_split_chunk, seed=seed, z=z, kind="in"), n, workers), seed)


def estimate_Vout_area(z: EnvParams, n: int, seed: int, workers: int | None = None) -> Estimate:
    """Mean visible area beyond r2 outside both shadow spans (k >= 2)."""
    return _estimate(_run_chunks(partial(_far_split_chunk, seed=seed, z=z, kind="out"), n, workers), seed)


def _vout_given_chunk(reps: np.ndarray, seed: int, z: EnvParams, p1: PolarPoint, p2: PolarPoint) -> np.ndarray:
    r2 = p2.r
    mu = z.lambda0 * math.pi * (z.R * z.R - r2 * r2)
    counts = _poisson_counts(rng.uniforms(seed, reps, rng.OBSTACLE_COUNT, 0), mu)
    near_half = 0.5 * theta_array(np.array([p1.r, p2.r]), z.L, z.R)

    def one(sub: np.ndarray, k: int) -> np.ndarray:
        slots = np.arange(k)
        u = rng.uniforms(seed, sub[:, None], rng.OBSTACLE_R, slots[None, :])
        far_r = np.sqrt(r2 * r2 + u * (z.R * z.R - r2 * r2))
        far_phi = 2.0 * math.pi * rng.uniforms(seed, sub[:, None], rng.OBSTACLE_PHI, slots[None, :])
        r = np.concatenate([np.tile([p1.r, p2.r], (sub.size, 1)), far_r], axis=1)
        phi = np.concatenate([np.tile([p1.phi, p2.phi], (sub.size, 1)), far_phi], axis=1)
        return sweep_visible_area(
            r,
            phi,
            z.L,
            z.R,
            r_in=r2,
            arc_centre=np.tile([p1.phi, p2.phi], (sub.size, 1)),
            arc_half=np.tile(near_half, (sub.size, 1)),
            inside_arcs=False,
        )

    return _by_count(reps, counts, one)


def estimate_Vout_area_given(
    p1: PolarPoint, p2: PolarPoint, z: EnvParams, n: int, seed: int, workers: int | None = None
) -> Estimate:
    """Visible area beyond r2 outside both shadow spans, with the nearest two fixed."""
    if not (p1.r <= p2.r <= z.R):
        raise ValueError("need r1 <= r2 <= R")
    fn = partial(_vout_given_chunk, seed=seed, z=z, p1=p1, p2=p2)
    return _estimate(_run_chunks(fn, n, workers), seed)
