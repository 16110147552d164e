"""Transition matrices with a prescribed stationary distribution.

Convention: ``P[i, j]`` is the probability of moving from region ``j`` to
region ``i``; columns sum to one and ``P @ w == w``.

Four constructions are provided:

* :func:`metropolis_hastings` -- the classical baseline,
* :func:`optimize_upper_bound` -- minimize ``||P - w 1^T||_2``,
* :func:`optimize_fmrmc` -- fastest mixing *reversible* chain, minimizing
  ``||W^-1/2 P W^1/2 - q q^T||_2`` under detailed balance,
* :func:`optimize_modified_upper_bound` -- the same similarity-transformed
  objective without detailed balance, so one-way edges stay usable.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _spectral_min
from .constants import (
    DEFLATE_STATIONARY_TOL,
    DETAILED_BALANCE_TOL,
    NEGATIVE_CLAMP,
    SLEM_SLACK,
    STATIONARY_TOL,
    STOCHASTIC_TOL,
)
from .errors import Infeasible, NotApplicable, StationarityViolated, SolverStalled
from .graph import RegionGraph, TargetDistribution, apply_weight_floor, graph_report, validate_graph
from .linalg import eigenvalue_moduli, spectral_norm

log = logging.getLogger(__name__)

__all__ = [
    "Method",
    "SolverSettings",
    "ChainSolution",
    "metropolis_hastings",
    "deflate",
    "slem",
    "optimize_upper_bound",
    "optimize_fmrmc",
    "optimize_modified_upper_bound",
    "solve_chain",
]


class Method(str, enum.Enum):
    METROPOLIS_HASTINGS = "metropolis-hastings"
    FMRMC = "fmrmc"
    UPPER_BOUND = "upper-bound"
    MODIFIED_UPPER_BOUND = "modified-upper-bound"


@dataclass(frozen=True)
class SolverSettings:
    max_iterations: int = 50_000
    tolerance: float = 1e-6
    step_schedule: str = "smoothed"
    restarts: int = 1
    seed: int = 0
    mu_final: float = 1e-5

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1 or self.restarts < 1:
            raise ValueError("max_iterations and restarts must be >= 1")


@dataclass
class ChainSolution:
    transition: np.ndarray
    target: TargetDistribution
    slem: float
    method: Method
    objective_value: float
    removed_edges: list[tuple[int, int]] = field(default_factory=list)
    iterations: int = 0

    @property
    def n(self) -> int:
        return self.transition.shape[0]

    def check(self, graph: RegionGraph | None = None) -> None:
        """Assert the type invariants; raises ``AssertionError`` on violation."""
        P, w = self.transition, self.target.weights
        assert np.all(np.abs(P.sum(axis=0) - 1.0) <= STOCHASTIC_TOL), "columns do not sum to 1"
        assert P.min() >= 0.0, "negative transition probability"
        assert np.abs(P @ w - w).max() <= STATIONARY_TOL, "w is not stationary"
        assert -SLEM_SLACK <= self.slem <= 1.0 + SLEM_SLACK, "SLEM out of range"
        if graph is not None:
            assert not np.any(P[~graph.support()] != 0.0), "mass on a non-edge"

    def to_dict(self) -> dict:
        d = {
            "method": self.method.value,
            "w": self.target.weights.tolist(),
            "P": self.transition.tolist(),
            "slem": self.slem,
            "objective": self.objective_value,
        }
        if self.removed_edges:
            d["removed_edges"] = [list(e) for e in self.removed_edges]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChainSolution":
        P = np.asarray(d["P"], dtype=float)
        w = TargetDistribution(np.asarray(d["w"], dtype=float))
        return cls(P, w, float(d["slem"]), Method(d["method"]), float(d["objective"]),
                   [tuple(e) for e in d.get("removed_edges", [])])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ChainSolution":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _target(w) -> TargetDistribution:
    if isinstance(w, TargetDistribution):
        return w
    return TargetDistribution.normalized(w)


def deflate(P, w) -> np.ndarray:
    """``P - w 1^T``; moves the unit eigenvalue of ``P`` to zero, keeps the rest."""
    P = np.asarray(P, dtype=float)
    wv = _target(w).weights
    if np.abs(P @ wv - wv).max() > DEFLATE_STATIONARY_TOL:
        raise StationarityViolated("P w != w; deflation would not remove the unit eigenvalue")
    return P - np.outer(wv, np.ones(P.shape[1]))


def slem(P, w) -> float:
    """Second largest eigenvalue modulus of ``P`` (largest modulus after deflation)."""
    return float(eigenvalue_moduli(deflate(P, w))[0])


def _similarity_norm(P: np.ndarray, w: np.ndarray) -> float:
    q = np.sqrt(w)
    return spectral_norm(P * (q[None, :] / q[:, None]) - np.outer(q, q))


def _finish(P: np.ndarray, g: RegionGraph, target: TargetDistribution, method: Method,
            objective: float, iterations: int = 0, removed=()) -> ChainSolution:
    P = P.copy()
    if P.min() < NEGATIVE_CLAMP:
        raise SolverStalled(f"iterate has entry {P.min():.3e} below the clamp tolerance")
    P[P < 0.0] = 0.0
    P[~g.support()] = 0.0
    P /= P.sum(axis=0, keepdims=True)
    w = target.weights
    if np.abs(P @ w - w).max() > STATIONARY_TOL:
        raise SolverStalled("stationarity lost after clamping")
    sol = ChainSolution(P, target, slem(P, target), method, float(objective), list(removed), iterations)
    sol.check(g)
    return sol


def _mh_matrix(g: RegionGraph, w: np.ndarray) -> np.ndarray:
    n = g.n
    nbrs = [g.out_neighbors(j, include_self=True) for j in range(n)]
    P = np.zeros((n, n))
    for j in range(n):
        qj = 1.0 / len(nbrs[j])
        for i in nbrs[j]:
            if i == j:
                continue
            # one-way edge: reverse proposal has probability 0, so always reject
            q_back = 1.0 / len(nbrs[i]) if j in nbrs[i] else 0.0
            P[i, j] = qj * min(1.0, (w[i] * q_back) / (w[j] * qj))
        P[j, j] = 1.0 - P[:, j].sum()
    return P


def metropolis_hastings(g: RegionGraph, w) -> ChainSolution:
    """Metropolis-Hastings chain: uniform proposals over out-neighbours.

    The proposal includes the current region when self-loops are allowed.
    Rejected mass stays put, which requires self-loops.
    """
    target = _target(w)
    validate_graph(g)
    wv = target.weights
    P = _mh_matrix(g, wv)
    P[P < 0.0] = 0.0
    if not g.allow_self_loops and np.any(np.diag(P) > 1e-12):
        raise NotApplicable("Metropolis-Hastings needs self-loops to hold rejected proposals")
    moving = RegionGraph(g.n, frozenset((j, i) for i, j in zip(*np.nonzero(P)) if i != j), g.allow_self_loops)
    if not graph_report(moving).irreducible:
        raise NotApplicable("one-way edges leave the Metropolis-Hastings chain reducible")
    return _finish(P, g, target, Method.METROPOLIS_HASTINGS, _similarity_norm(P, wv))


def _assemble(g: RegionGraph, w: np.ndarray, *, similarity: bool, reversible: bool) -> _spectral_min.NormProblem:
    n = g.n
    rows, cols = np.nonzero(g.support())
    k = rows.size
    A_cols = np.zeros((n, k))
    A_cols[cols, np.arange(k)] = 1.0
    A_stat = np.zeros((n, k))
    A_stat[rows, np.arange(k)] = w[cols]
    blocks = [A_cols, A_stat]
    rhs = [np.ones(n), w.copy()]
    if reversible:
        index = {(int(i), int(j)): t for t, (i, j) in enumerate(zip(rows, cols))}
        pairs = [(i, j) for (i, j) in index if i < j]
        A_db = np.zeros((len(pairs), k))
        for r, (i, j) in enumerate(pairs):
            A_db[r, index[(i, j)]] = w[j]
            A_db[r, index[(j, i)]] = -w[i]
        blocks.append(A_db)
        rhs.append(np.zeros(len(pairs)))
    if similarity:
        q = np.sqrt(w)
        scale = q[cols] / q[rows]
        offset = np.outer(q, q)
    else:
        scale = np.ones(k)
        offset = np.outer(w, np.ones(n))
    return _spectral_min.NormProblem(n, rows, cols, scale, offset, np.vstack(blocks), np.concatenate(rhs))


def _optimize(g: RegionGraph, w, settings: SolverSettings | None, method: Method, *,
              similarity: bool, reversible: bool) -> ChainSolution:
    settings = settings or SolverSettings()
    target = apply_weight_floor(_target(w).weights)
    wv = target.weights
    validate_graph(g)
    removed: list[tuple[int, int]] = []
    work = g
    if reversible:
        removed = g.one_way_edges()
        work = g.reversible_subgraph()
        if removed:
            log.warning("detailed balance removes one-way edges %s", removed)
        rep = graph_report(work)
        if not rep.irreducible:
            raise Infeasible(f"removing one-way edges {removed} disconnects the graph")
    prob = _assemble(work, wv, similarity=similarity, reversible=reversible)
    # warm start from Metropolis-Hastings; the projection repairs any mass off the support
    x0 = _mh_matrix(work if reversible else g.undirected_skeleton(), wv)[prob.rows, prob.cols]
    res = _spectral_min.minimize_spectral_norm(
        prob, x0, schedule=settings.step_schedule, max_iterations=settings.max_iterations,
        tolerance=settings.tolerance, restarts=settings.restarts, seed=settings.seed,
        mu_final=settings.mu_final)
    P = np.zeros((g.n, g.n))
    P[prob.rows, prob.cols] = res.x
    sol = _finish(P, work, target, method, 0.0, res.iterations, removed)
    # objective re-evaluated on the clamped matrix with the package's own norm
    sol.objective_value = _similarity_norm(sol.transition, wv) if similarity else spectral_norm(deflate(sol.transition, wv))
    if reversible:
        Pw = sol.transition * wv[None, :]
        if np.abs(Pw - Pw.T).max() > DETAILED_BALANCE_TOL:
            raise SolverStalled("detailed balance lost after clamping")
    return sol


def optimize_upper_bound(g: RegionGraph, w, settings: SolverSettings | None = None) -> ChainSolution:
    """Minimize ``||P - w 1^T||_2`` over chains on ``g`` with stationary ``w``."""
    return _optimize(g, w, settings, Method.UPPER_BOUND, similarity=False, reversible=False)


def optimize_fmrmc(g: RegionGraph, w, settings: SolverSettings | None = None) -> ChainSolution:
    """Fastest mixing reversible chain.

    One-way edges cannot carry mass under detailed balance and are dropped
    (listed in ``removed_edges``); ``Infeasible`` if that disconnects ``g``.
    """
    return _optimize(g, w, settings, Method.FMRMC, similarity=True, reversible=True)


def optimize_modified_upper_bound(g: RegionGraph, w, settings: SolverSettings | None = None) -> ChainSolution:
    """Similarity-transformed norm objective without detailed balance."""
    return _optimize(g, w, settings, Method.MODIFIED_UPPER_BOUND, similarity=True, reversible=False)


_DISPATCH = {
    Method.UPPER_BOUND: optimize_upper_bound,
    Method.FMRMC: optimize_fmrmc,
    Method.MODIFIED_UPPER_BOUND: optimize_modified_upper_bound,
}


def solve_chain(method: Method | str, g: RegionGraph, w, settings: SolverSettings | None = None) -> ChainSolution:
    method = Method(method)
    if method is Method.METROPOLIS_HASTINGS:
        return metropolis_hastings(g, w)
    return _DISPATCH[method](g, w, settings)
