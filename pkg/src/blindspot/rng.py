"""Counter-based random numbers.

Every uniform is a pure function of (seed, replication, stream, slot), so a
replication's draws do not depend on how replications are batched or which
worker computes them.  The mixer is the SplitMix64 finalizer applied to a
keyed combination of the four counters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_REP_KEY = np.uint64(0xD1B54A32D192ED03)
_STREAM_KEY = np.uint64(0x8CB92BA72F3D8DD7)
_MASK64 = (1 << 64) - 1

# stream identifiers for scene sampling
OBSTACLE_COUNT = 0
ANCHOR_COUNT = 1
OBSTACLE_R = 2
OBSTACLE_PHI = 3
ANCHOR_R = 4
ANCHOR_PHI = 5
POINT_R = 6
POINT_PHI = 7


def _mix(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> np.uint64(30))
    x = x * _M1
    x = x ^ (x >> np.uint64(27))
    x = x * _M2
    return x ^ (x >> np.uint64(31))


def uniforms(seed: int, rep, stream: int, slot) -> np.ndarray:
    """Uniform(0, 1) draws indexed by broadcastable ``rep`` and ``slot`` arrays."""
    rep = np.asarray(rep, dtype=np.uint64)
    slot = np.asarray(slot, dtype=np.uint64)
    key = np.uint64(int(seed) & _MASK64)
    with np.errstate(over="ignore"):
        h = _mix(np.asarray(key + _GOLDEN, dtype=np.uint64))
        h = _mix(h ^ (rep * _REP_KEY + _GOLDEN))
        h = _mix(h ^ (np.uint64(stream) * _STREAM_KEY + _GOLDEN))
        h = _mix(h + slot * _GOLDEN)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class Substream:
    """The random stream owned by one replication."""

    seed: int
    rep: int

    def uniforms(self, stream: int, n: int) -> np.ndarray:
        return uniforms(self.seed, self.rep, stream, np.arange(n))

    def uniform(self, stream: int, slot: int = 0) -> float:
        return float(uniforms(self.seed, self.rep, stream, slot))
