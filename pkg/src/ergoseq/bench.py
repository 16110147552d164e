"""SLEM benchmark: random targets on a fixed graph, every chain construction."""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chain import Method, SolverSettings, solve_chain
from .errors import ErgoseqError
from .graph import RegionGraph, TargetDistribution
from .rng import derive_int_seed, derive_rng

__all__ = ["BenchRow", "bench_target", "run_bench_trial", "run_bench", "bench_csv", "timing_csv",
           "histogram", "histogram_csv", "by_method"]

ALL_METHODS = tuple(Method)


@dataclass(frozen=True)
class BenchRow:
    trial: int
    method: Method
    slem: float
    objective: float
    status: str
    seconds: float


def bench_target(seed: int, trial: int, n: int) -> TargetDistribution:
    """Uniform [0, 1) entries, normalized."""
    u = derive_rng(seed, "bench-target", trial).random(n)
    return TargetDistribution.normalized(u)


def run_bench_trial(graph: RegionGraph, seed: int, trial: int, methods=ALL_METHODS,
                    settings: SolverSettings | None = None) -> list[BenchRow]:
    w = bench_target(seed, trial, graph.n)
    base = settings or SolverSettings()
    st = SolverSettings(base.max_iterations, base.tolerance, base.step_schedule, base.restarts,
                        derive_int_seed(seed, "bench-solver", trial) % 2**32, base.mu_final)
    rows = []
    for m in methods:
        t0 = time.perf_counter()
        try:
            sol = solve_chain(m, graph, w, st)
            slem_v, obj, status = sol.slem, sol.objective_value, "ok"
        except ErgoseqError as exc:
            slem_v, obj, status = float("nan"), float("nan"), type(exc).__name__
        rows.append(BenchRow(trial, Method(m), slem_v, obj, status, time.perf_counter() - t0))
    return rows


def _trial_args(args):
    return run_bench_trial(*args)


def run_bench(graph: RegionGraph, trials: int, seed: int, methods=ALL_METHODS,
              settings: SolverSettings | None = None, jobs: int = 1) -> list[BenchRow]:
    """Rows ordered by (trial, method order) whatever ``jobs`` is."""
    methods = tuple(Method(m) for m in methods)
    work = [(graph, seed, t, methods, settings) for t in range(trials)]
    if jobs <= 1 or trials <= 1:
        batches = [_trial_args(a) for a in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_trial_args, work, chunksize=max(1, trials // (4 * jobs))))
    return [r for b in batches for r in b]


def by_method(rows: list[BenchRow], field: str = "slem") -> dict[Method, np.ndarray]:
    out: dict[Method, list] = {}
    for r in rows:
        out.setdefault(r.method, []).append(getattr(r, field))
    return {m: np.array(v, dtype=float) for m, v in out.items()}


def _fmt(x: float) -> str:
    return "nan" if not np.isfinite(x) else f"{x:.10f}"


def bench_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "method", "slem", "objective", "status"])
    for r in rows:
        w.writerow([r.trial, r.method.value, _fmt(r.slem), _fmt(r.objective), r.status])
    return buf.getvalue()


def timing_csv(rows: list[BenchRow]) -> str:
    """Wall times live apart from the main table so that table stays reproducible."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "method", "wall_seconds"])
    for r in rows:
        w.writerow([r.trial, r.method.value, f"{r.seconds:.6f}"])
    return buf.getvalue()


def histogram(rows: list[BenchRow], bins: int = 50, lo: float = 0.0, hi: float = 1.0):
    edges = np.linspace(lo, hi, bins + 1)
    counts = {}
    for m, v in by_method(rows).items():
        v = v[np.isfinite(v)]
        counts[m] = np.histogram(np.clip(v, lo, hi), bins=edges)[0]
    return edges, counts


def histogram_csv(rows: list[BenchRow], bins: int = 50) -> str:
    edges, counts = histogram(rows, bins)
    methods = list(counts)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_lo", "bin_hi"] + [m.value for m in methods])
    for b in range(bins):
        w.writerow([f"{edges[b]:.4f}", f"{edges[b + 1]:.4f}"] + [int(counts[m][b]) for m in methods])
    return buf.getvalue()
