"""Finite-horizon region sequences drawn from an ergodic chain.

A sequence of ``K`` regions starts at the current region (which counts as a
visit) and follows the chain for ``K - 1`` transitions. Its cost is the total
variation distance between the empirical visit frequencies and the target.
Planning draws independent rollouts and keeps the cheapest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ChainSolution
from .rng import derive_rng

__all__ = ["Sequence", "tv_distance", "visit_frequencies", "rollout", "plan_sequence"]

DEFAULT_ROLLOUTS = 256


@dataclass(frozen=True)
class Sequence:
    regions: tuple[int, ...]
    horizon: int
    tv_cost: float

    @property
    def start(self) -> int:
        return self.regions[0]

    def to_dict(self) -> dict:
        return {"start": self.start, "K": self.horizon, "regions": list(self.regions), "tv_cost": self.tv_cost}

    @classmethod
    def from_dict(cls, d: dict) -> "Sequence":
        regions = tuple(int(r) for r in d["regions"])
        if regions[0] != int(d["start"]) or len(regions) != int(d["K"]):
            raise ValueError("sequence record is inconsistent")
        return cls(regions, int(d["K"]), float(d["tv_cost"]))


def tv_distance(freq, w) -> float:
    """Half the L1 distance between two probability vectors."""
    f = np.asarray(freq, dtype=float)
    g = np.asarray(getattr(w, "weights", w), dtype=float)
    if abs(f.sum() - 1.0) > 1e-9 or abs(g.sum() - 1.0) > 1e-9:
        raise ValueError("tv_distance needs two probability vectors")
    return float(min(1.0, 0.5 * np.abs(f - g).sum()))


def visit_frequencies(regions, n: int) -> np.ndarray:
    counts = np.bincount(np.asarray(regions, dtype=int), minlength=n)
    return counts / counts.sum()


def rollout(chain: ChainSolution, start: int, K: int, rng: np.random.Generator) -> Sequence:
    """Sample ``X[k+1] ~ P[:, X[k]]`` for ``K - 1`` steps from ``start``."""
    n = chain.n
    if K < 1:
        raise ValueError("horizon K must be >= 1")
    if not 0 <= start < n:
        raise ValueError(f"start region {start} out of range")
    cdf = np.cumsum(chain.transition, axis=0)
    cdf[-1, :] = 1.0
    regions = [int(start)]
    u = rng.random(K - 1)
    cur = int(start)
    for k in range(K - 1):
        col = chain.transition[:, cur]
        nxt = int(np.searchsorted(cdf[:, cur], u[k], side="right"))
        if col[nxt] == 0.0:
            # only reachable through rounding in the last cdf entry
            nxt = int(np.flatnonzero(col)[-1])
        cur = nxt
        regions.append(cur)
    w = chain.target.weights
    return Sequence(tuple(regions), K, tv_distance(visit_frequencies(regions, n), w))


def plan_sequence(chain: ChainSolution, start: int, K: int, n_rollouts: int = DEFAULT_ROLLOUTS,
                  rng: int | np.random.Generator = 0) -> Sequence:
    """Best of ``n_rollouts`` independent rollouts (lowest TV cost, earliest wins ties).

    Rollout ``i`` uses its own stream derived from the master seed, so results
    do not depend on how many rollouts run before it. A ``Generator`` passed as
    ``rng`` contributes one draw as the master seed.
    """
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    seed = int(rng.integers(0, 2**63)) if isinstance(rng, np.random.Generator) else int(rng)
    best = None
    for i in range(n_rollouts):
        seq = rollout(chain, start, K, derive_rng(seed, "rollout", i))
        if best is None or seq.tv_cost < best.tv_cost:
            best = seq
    return best
