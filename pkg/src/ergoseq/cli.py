"""Command-line entry point: ``ergoseq {solve,bench-slem,sequence,simulate}``.

Exit codes: 0 success, 2 unreadable input or bad usage, 3 input that parses
but fails validation, 4 solver failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import bench_csv, by_method, histogram_csv, run_bench, timing_csv
from .chain import ChainSolution, Method, SolverSettings, solve_chain
from .errors import ErgoseqError, GraphValidationError, SolverError
from .graph import RegionGraph, TargetDistribution, fig2_graph, load_graph, validate_graph
from .sequencer import plan_sequence
from .sim.policies import Policy
from .sim.runner import default_jobs, format_summary, run_trials, summarize, write_trials_csv
from .sim.scenario import ScenarioConfig

EXIT_PARSE, EXIT_VALIDATION, EXIT_SOLVER = 2, 3, 4
BUILTIN_GRAPHS = {"fig2-directed": True, "fig2-undirected": False}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_PARSE, f"cannot read {path}: {exc}") from exc


def _load_graph(spec: str, self_loops: str | None) -> RegionGraph:
    if spec in BUILTIN_GRAPHS:
        g = fig2_graph(directed=BUILTIN_GRAPHS[spec])
    else:
        try:
            g = load_graph(spec)
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CliError(EXIT_PARSE, f"cannot read graph {spec}: {exc}") from exc
        except ValueError as exc:
            raise CliError(EXIT_VALIDATION, f"invalid graph {spec}: {exc}") from exc
    if self_loops is not None:
        g = RegionGraph(g.node_count, g.edges, self_loops == "on", g.node_labels)
    return g


def _load_weights(spec: str, n: int) -> TargetDistribution:
    if spec == "uniform":
        return TargetDistribution.uniform(n)
    path = Path(spec)
    try:
        if path.exists():
            text = path.read_text()
            values = json.loads(text) if text.lstrip().startswith(("[", "{")) else text.split()
            if isinstance(values, dict):
                values = values["w"]
        else:
            values = spec.split(",")
        w = np.array([float(v) for v in values])
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_PARSE, f"cannot parse weights {spec!r}: {exc}") from exc
    if w.size != n:
        raise CliError(EXIT_VALIDATION, f"{w.size} weights given for {n} regions")
    try:
        return TargetDistribution.normalized(w)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, f"invalid weights: {exc}") from exc


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _write_manifest(out: Path, args, outputs: list[Path], config: str | None = None) -> Path:
    mpath = _manifest_path(out)
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:],
        "config": config,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": [str(p) for p in outputs],
    }
    mpath.write_text(json.dumps(manifest, indent=2) + "\n")
    return mpath


def _settings(args) -> SolverSettings:
    try:
        return SolverSettings(args.max_iterations, args.tolerance, args.step_schedule, args.restarts,
                              args.seed % 2**32)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, str(exc)) from exc


def cmd_solve(args) -> int:
    g = _load_graph(args.graph, args.self_loops)
    w = _load_weights(args.weights, g.n)
    # removed edges are reported below in one line
    logging.getLogger("ergoseq.chain").setLevel(logging.ERROR)
    sol = solve_chain(args.method, g, w, _settings(args))
    if sol.removed_edges:
        edges = ", ".join(f"{a}->{b}" for a, b in sol.removed_edges)
        print(f"warning: detailed balance removed one-way edges: {edges}", file=sys.stderr)
    out = Path(args.out)
    d = sol.to_dict()
    d["manifest"] = _manifest_path(out).name
    out.write_text(json.dumps(d, indent=2) + "\n")
    _write_manifest(out, args, [out], args.graph)
    print(f"method={sol.method.value} slem={sol.slem:.8f} objective={sol.objective_value:.8f}")
    return 0


def cmd_bench_slem(args) -> int:
    g = _load_graph(args.graph, args.self_loops)
    if args.trials < 1:
        raise CliError(EXIT_VALIDATION, "--trials must be >= 1")
    validate_graph(g)
    # the reversible method warns once per trial otherwise
    logging.getLogger("ergoseq.chain").setLevel(logging.ERROR)
    methods = [Method(m) for m in args.methods.split(",")] if args.methods else list(Method)
    rows = run_bench(g, args.trials, args.seed, methods, _settings(args), jobs=args.jobs or default_jobs())
    out = Path(args.out)
    out.write_text(bench_csv(rows))
    outputs = [out]
    timing = Path(args.timing) if args.timing else out.with_name(out.stem + ".timing.csv")
    timing.write_text(timing_csv(rows))
    outputs.append(timing)
    if args.hist:
        Path(args.hist).write_text(histogram_csv(rows, args.bins))
        outputs.append(Path(args.hist))
    _write_manifest(out, args, outputs, args.graph)
    for m, v in by_method(rows).items():
        ok = v[np.isfinite(v)]
        mean = f"{ok.mean():.6f}" if ok.size else "nan"
        print(f"{m.value:<22} mean_slem={mean} ok={ok.size}/{v.size}")
    return 0


def cmd_sequence(args) -> int:
    d = _read_json(args.solution)
    try:
        sol = ChainSolution.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_PARSE if isinstance(exc, (KeyError, TypeError)) else EXIT_VALIDATION,
                       f"invalid solution file: {exc}") from exc
    try:
        sol.check()
    except AssertionError as exc:
        raise CliError(EXIT_VALIDATION, f"invalid solution file: {exc}") from exc
    if not 0 <= args.start < sol.n:
        raise CliError(EXIT_VALIDATION, f"start {args.start} outside 0..{sol.n - 1}")
    if args.K < 1 or args.rollouts < 1:
        raise CliError(EXIT_VALIDATION, "--K and --rollouts must be >= 1")
    seq = plan_sequence(sol, args.start, args.K, args.rollouts, args.seed)
    out = Path(args.out)
    rec = seq.to_dict()
    rec["manifest"] = _manifest_path(out).name
    out.write_text(json.dumps(rec, indent=2) + "\n")
    _write_manifest(out, args, [out], args.solution)
    print(f"regions={' '.join(map(str, seq.regions))} tv_cost={seq.tv_cost:.8f}")
    return 0


def cmd_simulate(args) -> int:
    if args.config:
        raw = _read_json(args.config)
        try:
            cfg = ScenarioConfig.from_dict(raw, base_dir=Path(args.config).parent)
        except (TypeError, KeyError) as exc:
            raise CliError(EXIT_PARSE, f"cannot parse scenario config: {exc}") from exc
        except (ValueError, OSError) as exc:
            raise CliError(EXIT_VALIDATION, f"invalid scenario config: {exc}") from exc
    else:
        cfg = ScenarioConfig()
    if args.graph:
        cfg.graph = _load_graph(args.graph, args.self_loops)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise CliError(EXIT_VALIDATION, "--trials must be >= 1")
        cfg.trials = args.trials
    validate_graph(cfg.graph)
    try:
        policies = [Policy(p) for p in args.policies.split(",")]
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"unknown policy: {exc}") from exc
    records = run_trials(cfg, policies, jobs=args.jobs or default_jobs())
    summary = format_summary(summarize(records))
    out = Path(args.out)
    write_trials_csv(records, out.open("w", newline=""))
    outputs = [out]
    if args.summary:
        Path(args.summary).write_text(summary)
        outputs.append(Path(args.summary))
    _write_manifest(out, args, outputs, args.config)
    sys.stdout.write(summary)
    return 0


def _add_graph_args(p):
    p.add_argument("--graph", required=True, help="graph JSON file, or fig2-directed / fig2-undirected")
    p.add_argument("--self-loops", choices=["on", "off"], default=None, help="override the graph's self-loop flag")


def _add_solver_args(p):
    p.add_argument("--max-iterations", type=int, default=50_000)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--step-schedule", choices=["smoothed", "subgradient"], default="smoothed")
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ergoseq", description="Fast-mixing chains and ergodic region sequences.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="design a transition matrix for a target distribution")
    _add_graph_args(p)
    p.add_argument("--weights", default="uniform", help="'uniform', a file, or comma-separated values")
    p.add_argument("--method", choices=[m.value for m in Method], default=Method.MODIFIED_UPPER_BOUND.value)
    p.add_argument("--out", required=True)
    _add_solver_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench-slem", help="SLEM of every method over random targets")
    _add_graph_args(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--methods", default=None, help="comma-separated subset of methods")
    p.add_argument("--out", required=True)
    p.add_argument("--timing", default=None, help="wall-time CSV (default: <out stem>.timing.csv)")
    p.add_argument("--hist", default=None, help="histogram CSV of SLEM per method")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--jobs", type=int, default=None)
    _add_solver_args(p)
    p.set_defaults(func=cmd_bench_slem)

    p = sub.add_parser("sequence", help="plan a finite-horizon sequence from a solution")
    p.add_argument("--solution", required=True)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--rollouts", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sequence)

    p = sub.add_parser("simulate", help="run the inspection simulation")
    p.add_argument("--config", default=None, help="scenario config JSON (defaults if omitted)")
    p.add_argument("--graph", default=None, help="override the config's graph")
    p.add_argument("--self-loops", choices=["on", "off"], default=None)
    p.add_argument("--policies", default="random,greedy,ergodic")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--summary", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except GraphValidationError as exc:
        print(f"error: invalid graph: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ErgoseqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
