"""Smallest anchor intensity whose approximate blind-spot probability is at most mu."""
from __future__ import annotations

from dataclasses import dataclass, field

from .analytic import BlindSpotParams, QuadratureSpec, DEFAULT_QUADRATURE, b_2plus, mean_visible_area
from .geometry import EnvParams


class DesignError(RuntimeError):
    """Raised when the target probability cannot be reached within the search budget."""


@dataclass
class DesignResult:
    lambda_star: float
    achieved: float
    iterations: int
    history: list[tuple[float, float]] = field(default_factory=list)

    def mean_anchors(self, z: EnvParams) -> float:
        return self.lambda_star * z.disc_area


def required_anchor_intensity(
    z: EnvParams,
    mu: float,
    kv: int = 3,
    tol: float = 1e-6,
    max_doublings: int = 60,
    max_iter: int = 200,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
) -> DesignResult:
    """Bisect on lambda using that b_2plus is non-increasing in lambda.

    The upper end starts at 4*kv/E[A_v] and doubles until it meets the
    target.  Bisection stops once the bracket is narrower than
    ``tol * lambda_hi``; the returned intensity is the upper end, so the
    achieved probability never exceeds ``mu``.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if mu >= 1.0:
        return DesignResult(lambda_star=0.0, achieved=1.0, iterations=0)
    if mu <= 0.0:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")

    def b(lam: float) -> float:
        return b_2plus(BlindSpotParams(lam=lam, z=z, kv=kv), quad)

    history: list[tuple[float, float]] = []
    lo = 0.0
    hi = 4.0 * kv / mean_visible_area(z)
    b_hi = b(hi)
    history.append((hi, b_hi))
    doublings = 0
    while b_hi > mu:
        if doublings >= max_doublings:
            raise DesignError(
                f"b_2plus still {b_hi:.3e} > mu={mu:.3e} at lambda={hi:.6g} after {doublings} doublings"
            )
        lo = hi
        hi *= 2.0
        b_hi = b(hi)
        history.append((hi, b_hi))
        doublings += 1

    iterations = 0
    while hi - lo > tol * hi and b_hi != mu:
        if iterations >= max_iter:
            break
        mid = 0.5 * (lo + hi)
        b_mid = b(mid)
        history.append((mid, b_mid))
        if b_mid <= mu:
            hi, b_hi = mid, b_mid
        else:
            lo = mid
        iterations += 1
    return DesignResult(lambda_star=hi, achieved=b_hi, iterations=iterations + doublings, history=history)
