"""Traversal policies and per-trial scoring."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..chain import SolverSettings, optimize_modified_upper_bound
from ..constants import BELIEF_CLAMP
from ..detector import process_observation_batch, region_entropy
from ..graph import weights_from_entropy
from ..rng import derive_int_seed, derive_rng
from ..sequencer import plan_sequence
from .scenario import Scenario, observe_node

__all__ = ["Policy", "TrialRecord", "bce_loss", "run_policy_trial"]


class Policy(str, enum.Enum):
    RANDOM = "random"
    GREEDY_MAX_ENTROPY = "greedy"
    ENTROPY_ERGODIC = "ergodic"

    @property
    def label(self) -> str:
        return {"random": "Random", "greedy": "Maximum Entropy", "ergodic": "Entropy Ergodic"}[self.value]


def bce_loss(beliefs, labels, subset: str = "all") -> float:
    """Mean binary cross-entropy of per-node ``P(H1)`` against anomaly labels.

    ``subset="anomalous_only"`` averages over anomalous nodes only (NaN if
    there are none).
    """
    p = np.clip(np.asarray(beliefs, dtype=float), BELIEF_CLAMP, 1.0 - BELIEF_CLAMP)
    y = np.asarray(labels, dtype=bool)
    if subset == "anomalous_only":
        p, y = p[y], y[y]
    elif subset != "all":
        raise ValueError(f"unknown subset {subset!r}")
    if p.size == 0:
        return float("nan")
    return float(np.mean(-(y * np.log(p) + (~y) * np.log(1.0 - p))))


@dataclass
class TrialRecord:
    trial: int
    policy: Policy
    anomaly_labels: tuple[bool, ...]
    final_beliefs: tuple[float, ...]
    final_beliefs_mean: tuple[float, ...]
    visit_sequence: tuple[int, ...]
    bce_anomalous: float
    bce_all: float
    bce_anomalous_mean: float
    bce_all_mean: float
    clamped_fraction: float
    replans: int = 0
    extra: dict = field(default_factory=dict)


def run_policy_trial(scenario: Scenario, policy: Policy | str, trial_seed: int, trial: int = 0) -> TrialRecord:
    """Walk the region graph for ``config.steps`` moves under ``policy``.

    Observation noise at the ``v``-th visit to node ``n`` comes from the stream
    ``(trial_seed, "observe", n, v)``, so every policy sees the same data for
    matched visits.
    """
    policy = Policy(policy)
    cfg = scenario.config
    g = cfg.graph
    clouds = [nd.reference.copy() for nd in scenario.nodes]
    visits = np.zeros(g.n, dtype=int)

    def visit(node: int):
        pts, cov = observe_node(scenario, node, derive_rng(trial_seed, "observe", node, int(visits[node])))
        visits[node] += 1
        process_observation_batch(clouds[node], pts, cov, cfg.detector)

    walk_rng = derive_rng(trial_seed, "random-walk")
    settings = SolverSettings(seed=derive_int_seed(trial_seed, "solver") % (2**32))
    plan: list[int] = []
    replans = 0
    cur = cfg.start_node
    seq = [cur]
    visit(cur)
    for _ in range(cfg.steps):
        if policy is Policy.RANDOM:
            nbrs = g.out_neighbors(cur, include_self=cfg.random_walk_self_loops)
            nxt = int(nbrs[walk_rng.integers(len(nbrs))]) if nbrs else cur
        elif policy is Policy.GREEDY_MAX_ENTROPY:
            nbrs = g.out_neighbors(cur)
            if nbrs:
                ent = [region_entropy(clouds[j]) for j in nbrs]
                nxt = int(nbrs[int(np.argmax(ent))])
            else:
                nxt = cur
        else:
            if not plan:
                w = weights_from_entropy([region_entropy(c) for c in clouds])
                chain = optimize_modified_upper_bound(g, w, settings)
                s = plan_sequence(chain, cur, cfg.horizon_K, cfg.n_rollouts,
                                  derive_int_seed(trial_seed, "plan", replans))
                replans += 1
                plan = list(s.regions[1:]) or [cur]
            nxt = plan.pop(0)
        cur = nxt
        seq.append(cur)
        visit(cur)

    labels = scenario.labels
    b_max = np.array([c.belief_h1.max() for c in clouds])
    b_mean = np.array([c.belief_h1.mean() for c in clouds])
    all_b = np.concatenate([c.belief_h1 for c in clouds])
    clamped = np.mean((all_b <= BELIEF_CLAMP) | (all_b >= 1.0 - BELIEF_CLAMP))
    return TrialRecord(
        trial=trial,
        policy=policy,
        anomaly_labels=tuple(bool(v) for v in labels),
        final_beliefs=tuple(float(v) for v in b_max),
        final_beliefs_mean=tuple(float(v) for v in b_mean),
        visit_sequence=tuple(seq),
        bce_anomalous=bce_loss(b_max, labels, "anomalous_only"),
        bce_all=bce_loss(b_max, labels, "all"),
        bce_anomalous_mean=bce_loss(b_mean, labels, "anomalous_only"),
        bce_all_mean=bce_loss(b_mean, labels, "all"),
        clamped_fraction=float(clamped),
        replans=replans,
    )
