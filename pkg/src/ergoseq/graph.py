"""Directed region graphs and target visit distributions."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .constants import WEIGHT_FLOOR, ZERO_ENTROPY_TOL
from .errors import NotIrreducible, Periodic

__all__ = [
    "RegionGraph",
    "TargetDistribution",
    "GraphReport",
    "graph_report",
    "validate_graph",
    "weights_from_entropy",
    "apply_weight_floor",
    "load_graph",
    "fig2_graph",
]


@dataclass(frozen=True)
class RegionGraph:
    """Regions as nodes, allowed transitions as directed edges ``(from, to)``.

    Self-loops are never listed in ``edges``; ``allow_self_loops`` adds every
    ``(i, i)`` implicitly.
    """

    node_count: int
    edges: frozenset[tuple[int, int]]
    allow_self_loops: bool = True
    node_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("graph needs at least one node")
        clean = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if not (0 <= a < self.node_count and 0 <= b < self.node_count):
                raise ValueError(f"edge ({a}, {b}) out of range")
            if a != b:
                clean.add((a, b))
        object.__setattr__(self, "edges", frozenset(clean))
        if self.node_labels is not None and len(self.node_labels) != self.node_count:
            raise ValueError("node_labels length must equal node_count")

    @classmethod
    def from_edges(cls, node_count: int, directed: Iterable = (), undirected: Iterable = (),
                   allow_self_loops: bool = True, node_labels: Sequence[str] | None = None) -> "RegionGraph":
        e = {(int(a), int(b)) for a, b in directed}
        for a, b in undirected:
            e.add((int(a), int(b)))
            e.add((int(b), int(a)))
        labels = tuple(node_labels) if node_labels is not None else None
        return cls(node_count, frozenset(e), allow_self_loops, labels)

    @property
    def n(self) -> int:
        return self.node_count

    def has_edge(self, a: int, b: int) -> bool:
        if a == b:
            return self.allow_self_loops
        return (a, b) in self.edges

    def out_neighbors(self, i: int, include_self: bool = False) -> list[int]:
        nbrs = sorted(b for a, b in self.edges if a == i)
        if include_self and self.allow_self_loops:
            nbrs = sorted(nbrs + [i])
        return nbrs

    def support(self) -> np.ndarray:
        """Boolean ``S[to, from]``, the allowed pattern of a column-stochastic ``P``."""
        S = np.zeros((self.n, self.n), dtype=bool)
        for a, b in self.edges:
            S[b, a] = True
        if self.allow_self_loops:
            np.fill_diagonal(S, True)
        return S

    def one_way_edges(self) -> list[tuple[int, int]]:
        return sorted((a, b) for a, b in self.edges if (b, a) not in self.edges)

    def is_undirected(self) -> bool:
        return not self.one_way_edges()

    def undirected_skeleton(self) -> "RegionGraph":
        return RegionGraph.from_edges(self.n, undirected=self.edges,
                                      allow_self_loops=self.allow_self_loops,
                                      node_labels=self.node_labels)

    def reversible_subgraph(self) -> "RegionGraph":
        """Drop one-way edges; detailed balance forces both directions to zero."""
        keep = {(a, b) for a, b in self.edges if (b, a) in self.edges}
        return RegionGraph(self.n, frozenset(keep), self.allow_self_loops, self.node_labels)

    def relabel(self, perm: Sequence[int]) -> "RegionGraph":
        """Graph with node ``i`` renamed to ``perm[i]``."""
        e = {(perm[a], perm[b]) for a, b in self.edges}
        return RegionGraph(self.n, frozenset(e), self.allow_self_loops, None)

    def to_dict(self) -> dict:
        und = sorted((a, b) for a, b in self.edges if a < b and (b, a) in self.edges)
        one = self.one_way_edges()
        d = {"nodes": self.n, "self_loops": self.allow_self_loops,
             "edges": [list(e) for e in one], "undirected_edges": [list(e) for e in und]}
        if self.node_labels is not None:
            d["labels"] = list(self.node_labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RegionGraph":
        return cls.from_edges(int(d["nodes"]), d.get("edges", ()), d.get("undirected_edges", ()),
                              bool(d.get("self_loops", True)), d.get("labels"))


@dataclass(frozen=True)
class TargetDistribution:
    weights: np.ndarray = field(repr=True)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("target weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"target weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, values) -> "TargetDistribution":
        v = np.asarray(values, dtype=float)
        return cls(v / v.sum())

    @classmethod
    def uniform(cls, n: int) -> "TargetDistribution":
        return cls(np.full(n, 1.0 / n))

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True)
class GraphReport:
    node_count: int
    edge_count: int
    irreducible: bool
    aperiodic: bool
    period: int | None
    has_self_loops: bool
    one_way_edges: tuple[tuple[int, int], ...]

    def as_dict(self) -> dict:
        return {k: (list(map(list, v)) if k == "one_way_edges" else v) for k, v in self.__dict__.items()}


def _reach(n: int, adj: list[list[int]], src: int = 0) -> list[int]:
    level = [-1] * n
    level[src] = 0
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
    return level


def graph_report(g: RegionGraph) -> GraphReport:
    n = g.n
    fwd = [[] for _ in range(n)]
    rev = [[] for _ in range(n)]
    for a, b in g.edges:
        fwd[a].append(b)
        rev[b].append(a)
    level = _reach(n, fwd)
    back = _reach(n, rev)
    irreducible = min(level) >= 0 and min(back) >= 0
    period = None
    if irreducible:
        period = 1 if g.allow_self_loops else 0
        if not g.allow_self_loops:
            for a, b in g.edges:
                period = math.gcd(period, level[a] + 1 - level[b])
            if n == 1:
                period = 0  # lone node with no self-loop has no cycles at all
    return GraphReport(
        node_count=n,
        edge_count=len(g.edges),
        irreducible=irreducible,
        aperiodic=period == 1,
        period=period,
        has_self_loops=g.allow_self_loops,
        one_way_edges=tuple(g.one_way_edges()),
    )


def validate_graph(g: RegionGraph) -> GraphReport:
    """Report on ``g``; raise if a chain on it cannot be irreducible and aperiodic."""
    rep = graph_report(g)
    if not rep.irreducible:
        raise NotIrreducible("region graph is not strongly connected")
    if not rep.aperiodic:
        raise Periodic(f"region graph is periodic (period {rep.period})")
    return rep


def weights_from_entropy(entropies) -> TargetDistribution:
    h = np.asarray(entropies, dtype=float)
    if np.any(h < 0):
        raise ValueError("entropies must be non-negative")
    if np.all(h <= ZERO_ENTROPY_TOL):
        return TargetDistribution.uniform(h.size)
    return apply_weight_floor(h / h.sum())


def apply_weight_floor(w, floor: float = WEIGHT_FLOOR) -> TargetDistribution:
    """Raise entries below ``floor`` and renormalize (a zero target breaks irreducibility)."""
    w = np.asarray(w, dtype=float)
    w = np.maximum(w, floor)
    return TargetDistribution(w / w.sum())


def load_graph(path: str | Path) -> RegionGraph:
    with open(path) as fh:
        return RegionGraph.from_dict(json.load(fh))


def fig2_graph(directed: bool = True, self_loops: bool | None = None) -> RegionGraph:
    """The bundled 9-region benchmark graph (one-way edges 1->4 and 6->7 when directed)."""
    name = "fig2_directed.json" if directed else "fig2_undirected.json"
    d = json.loads(resources.files("ergoseq.assets").joinpath(name).read_text())
    if self_loops is not None:
        d["self_loops"] = self_loops
    return RegionGraph.from_dict(d)
