"""Trial runner: parallel execution, deterministic aggregation, CSV output."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..rng import derive_int_seed, derive_rng
from .policies import Policy, TrialRecord, run_policy_trial
from .scenario import ScenarioConfig, generate_scenario

__all__ = ["trial_seed", "run_trial", "run_trials", "summarize", "PolicySummary",
           "write_trials_csv", "format_summary", "default_jobs"]

CSV_FIELDS = ["trial", "policy", "bce_anomalous", "bce_all", "bce_anomalous_mean", "bce_all_mean",
              "n_anomalous", "clamped_fraction", "visit_sequence"]


def default_jobs() -> int:
    env = os.environ.get("ERGOSEQ_JOBS")
    if env:
        return max(1, int(env))
    return 1


def trial_seed(master_seed: int, trial: int) -> int:
    return derive_int_seed(master_seed, "trial", trial)


def run_trial(config: ScenarioConfig, trial: int, policies=tuple(Policy)) -> list[TrialRecord]:
    """All policies on one scenario, sharing the scenario and observation streams."""
    seed = trial_seed(config.seed, trial)
    scenario = generate_scenario(config, derive_rng(seed, "scenario"))
    return [run_policy_trial(scenario, Policy(p), seed, trial) for p in policies]


def _run_trial_args(args):
    return run_trial(*args)


def run_trials(config: ScenarioConfig, policies=tuple(Policy), trials: int | None = None,
               jobs: int | None = None, first_trial: int = 0) -> list[TrialRecord]:
    """Run ``trials`` trials; records come back ordered by (trial, policy order)."""
    trials = config.trials if trials is None else trials
    jobs = default_jobs() if jobs is None else max(1, jobs)
    policies = tuple(Policy(p) for p in policies)
    work = [(config, first_trial + t, policies) for t in range(trials)]
    if jobs == 1 or trials <= 1:
        batches = [_run_trial_args(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_run_trial_args, work, chunksize=max(1, trials // (4 * jobs))))
    return [r for batch in batches for r in batch]


@dataclass(frozen=True)
class PolicySummary:
    policy: Policy
    trials: int
    bce_anomalous_mean: float
    bce_anomalous_se: float
    bce_all_mean: float
    bce_all_se: float
    bce_anomalous_nodemean: float
    bce_all_nodemean: float
    clamped_fraction: float


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def summarize(records: list[TrialRecord]) -> list[PolicySummary]:
    out = []
    order = []
    for r in records:
        if r.policy not in order:
            order.append(r.policy)
    for p in order:
        rs = [r for r in records if r.policy is p]
        am, ase = _mean_se([r.bce_anomalous for r in rs])
        lm, lse = _mean_se([r.bce_all for r in rs])
        out.append(PolicySummary(
            p, len(rs), am, ase, lm, lse,
            _mean_se([r.bce_anomalous_mean for r in rs])[0],
            _mean_se([r.bce_all_mean for r in rs])[0],
            float(np.mean([r.clamped_fraction for r in rs])),
        ))
    return out


def _fmt(x: float) -> str:
    return "nan" if not np.isfinite(x) else f"{x:.6f}"


def write_trials_csv(records: list[TrialRecord], fh=None) -> str:
    """One row per (trial, policy). Returns the CSV text and writes it to ``fh`` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow([r.trial, r.policy.value, _fmt(r.bce_anomalous), _fmt(r.bce_all),
                    _fmt(r.bce_anomalous_mean), _fmt(r.bce_all_mean), sum(r.anomaly_labels),
                    _fmt(r.clamped_fraction), " ".join(map(str, r.visit_sequence))])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def format_summary(summaries: list[PolicySummary]) -> str:
    lines = [f"{'policy':<18}{'trials':>7}  {'BCE anomalous':>18}  {'BCE all':>18}  "
             f"{'(node mean) anom':>17}  {'(node mean) all':>16}"]
    for s in summaries:
        lines.append(
            f"{s.policy.label:<18}{s.trials:>7}  "
            f"{s.bce_anomalous_mean:>9.3f} ± {s.bce_anomalous_se:<6.3f}  "
            f"{s.bce_all_mean:>9.3f} ± {s.bce_all_se:<6.3f}  "
            f"{s.bce_anomalous_nodemean:>17.3f}  {s.bce_all_nodemean:>16.3f}")
    return "\n".join(lines) + "\n"
