"""Command line interface: parse inputs, solve, sweep, audit, validate.

Subcommands
-----------
tap        solve a traffic assignment and write the per-arc flow table
optimize   optimize the lane configuration at equilibrated flows
sweep      demand-multiplier or reversal-budget sweeps (plot-ready CSVs)
audit      exact single-reversal optimality audit of a lane table
validate   parse inputs and report network statistics

Every data output is deterministic for fixed inputs and settings; each
output file is accompanied by a ``<name>.manifest.json`` recording the
command, the configuration snapshot, and digests of the exact input bytes.
Exit codes: 0 success, 1 input or usage error, 2 convergence warning.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .laneopt import (
    LaProblem,
    relaxed_lower_bound,
    project_bound,
    solve_lane_assignment,
    solve_lane_assignment_budget,
)
from .model import LaneInfeasibleError, total_cost
from .netio import (
    ParseError,
    RunConfig,
    format_float,
    parse_demand,
    parse_network,
    write_result,
)
from .pipeline import (
    arc_improvements,
    audit_single_reversals,
    budget_sweep,
    demand_sweep,
)
from .tap import TapInfeasibleError, TapSettings, solve_tap, travel_times

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="contraflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"contraflow {__version__}")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps/audits")
    parser.add_argument("--seed", type=int, help="override the configured random seed")
    parser.add_argument("--out-dir", default=".", help="directory for relative output paths")
    parser.add_argument("--use-file-bpr", action="store_true",
                        help="take BPR b/power from the network file columns")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, lanes_required=False, trips=True):
        p.add_argument("net", help="TNTP network file")
        if trips:
            p.add_argument("trips", help="TNTP trips file")
        if lanes_required:
            p.add_argument("lanes", help="lane table CSV (init,term,lanes)")
        else:
            p.add_argument("--lanes", help="lane table CSV (init,term,lanes)")
        p.add_argument("--multiplier", type=float, default=1.0, help="demand multiplier")

    p_tap = sub.add_parser("tap", help="solve a traffic assignment")
    add_common(p_tap)
    p_tap.add_argument("--mode", choices=("so", "uc"), default="so")
    p_tap.add_argument("--rel-gap", type=float, help="override the relative gap tolerance")
    p_tap.add_argument("--max-iters", type=int, help="override the iteration cap")
    p_tap.add_argument("--out", required=True, help="per-arc flow table CSV")

    p_opt = sub.add_parser("optimize", help="optimize lanes at equilibrated flows")
    add_common(p_opt)
    p_opt.add_argument("--budget", type=int, help="maximum number of lane reversals")
    p_opt.add_argument("--bound", action="store_true", help="also compute bound certificates")
    p_opt.add_argument("--improvements", action="store_true",
                       help="also write the per-arc travel-time improvement table")
    p_opt.add_argument("--out", required=True, help="per-arc result CSV (summary JSON alongside)")

    p_sweep = sub.add_parser("sweep", help="demand or budget sweep")
    add_common(p_sweep)
    p_sweep.add_argument("--kind", choices=("demand", "budget"), required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated sweep values")
    p_sweep.add_argument("--out", required=True, help="sweep table CSV (plot CSV alongside)")

    p_audit = sub.add_parser("audit", help="exact single-reversal audit")
    add_common(p_audit, lanes_required=True)
    p_audit.add_argument("--sample", type=int, help="audit only this many seeded-sampled pairs")
    p_audit.add_argument("--out", required=True, help="audit table CSV")

    p_val = sub.add_parser("validate", help="parse inputs and report statistics")
    p_val.add_argument("net", help="TNTP network file")
    p_val.add_argument("trips", nargs="?", help="TNTP trips file")
    p_val.add_argument("--lanes", help="lane table CSV")
    p_val.add_argument("--out", help="optional JSON statistics file")
    return parser


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.use_file_bpr:
        cfg = replace(cfg, use_file_bpr=True)
    return cfg


def _out_path(args, name: str) -> Path:
    path = Path(name)
    if not path.is_absolute():
        path = Path(args.out_dir) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out_path: Path, args, cfg: RunConfig, inputs: list[str],
                    outputs: list[Path], diagnostics: dict, started: float) -> None:
    manifest = {
        "command": [args.command] + [str(a) for a in getattr(args, "_argv", [])],
        "tool_version": __version__,
        "config": cfg.to_dict(),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "diagnostics": diagnostics,
        "wall_clock_s": time.monotonic() - started,
    }
    path = out_path.with_name(out_path.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _parse_inputs(args, cfg: RunConfig, need_trips=True):
    network = parse_network(args.net, getattr(args, "lanes", None), cfg)
    od = None
    if need_trips and getattr(args, "trips", None):
        od = parse_demand(args.trips, args.multiplier, network)
    return network, od


def _input_files(args) -> list[str]:
    files = [args.net]
    if getattr(args, "trips", None):
        files.append(args.trips)
    if getattr(args, "lanes", None):
        files.append(args.lanes)
    if args.config:
        files.append(args.config)
    return files


def _cmd_tap(args, cfg: RunConfig) -> int:
    started = time.monotonic()
    network, od = _parse_inputs(args, cfg)
    settings = TapSettings(
        mode=args.mode,
        rel_gap_tol=args.rel_gap if args.rel_gap is not None else cfg.fw_rel_gap,
        max_iterations=args.max_iters if args.max_iters is not None else cfg.fw_max_iters,
        line_search_tol=cfg.fw_line_search_tol,
    )
    lanes = network.nominal_lanes()
    solution = solve_tap(network, lanes, od, settings)
    times = travel_times(network, lanes, solution.flows)

    header = ["init", "term", "lanes", "flow", "time", "cost"]
    rows = []
    for arc in sorted(network.arcs, key=lambda a: (a.tail, a.head)):
        x = solution.flows[arc.id]
        rows.append([arc.tail, arc.head, int(lanes[arc.id]), x, float(times[arc.id]),
                     x * float(times[arc.id])])
    out = _out_path(args, args.out)
    write_result((header, rows), out, "csv")
    diagnostics = {
        "mode": solution.mode,
        "objective": solution.objective,
        "total_cost": solution.total_cost,
        "relative_gap": solution.relative_gap,
        "iterations": solution.iterations,
        "converged": solution.converged,
    }
    _write_manifest(out, args, cfg, _input_files(args), [out], diagnostics, started)
    return EXIT_OK if solution.converged else EXIT_NOT_CONVERGED


def _cmd_optimize(args, cfg: RunConfig) -> int:
    started = time.monotonic()
    network, od = _parse_inputs(args, cfg)
    settings = TapSettings(mode="so", rel_gap_tol=cfg.fw_rel_gap,
                           max_iterations=cfg.fw_max_iters,
                           line_search_tol=cfg.fw_line_search_tol)
    base = solve_tap(network, network.nominal_lanes(), od, settings)
    problem = LaProblem.from_network(network, base.flows, budget=args.budget)
    if args.budget is not None:
        result = solve_lane_assignment_budget(problem)
    else:
        result = solve_lane_assignment(problem)
    if args.bound:
        relaxed = relaxed_lower_bound(network, base.flows, xi=cfg.lb_xi, step=cfg.lb_step,
                                      max_sweeps=cfg.lb_max_sweeps)
        # The projection ignores the budget, so its objective is only
        # comparable (and reported) for the unconstrained solve.
        projected_objective = None
        if args.budget is None:
            projected = project_bound(network, relaxed.lanes, base.flows)
            projected_objective = total_cost(network, projected, base.flows)
        result = replace(
            result,
            relaxed_bound=relaxed.bound,
            projected_objective=projected_objective,
        )

    out = _out_path(args, args.out)
    write_result(result, out, "csv")
    summary_path = out.with_suffix(".json")
    write_result(result, summary_path, "json")
    outputs = [out, summary_path]
    if args.improvements:
        imp = arc_improvements(network, base.flows, result.nominal_lanes, result.lanes)
        imp_path = out.with_name(out.stem + ".improvements.csv")
        write_result(imp, imp_path, "csv")
        outputs.append(imp_path)
    diagnostics = {
        "objective": result.objective,
        "objective_nominal": float(np.sum(result.arc_costs_nominal)),
        "reversals": result.reversals,
        "total_lanes": result.nominal_lanes.total(),
        "tap_gap": base.relative_gap,
        "tap_iterations": base.iterations,
        "tap_converged": base.converged,
    }
    _write_manifest(out, args, cfg, _input_files(args), outputs, diagnostics, started)
    return EXIT_OK if base.converged else EXIT_NOT_CONVERGED


def _cmd_sweep(args, cfg: RunConfig) -> int:
    started = time.monotonic()
    network, od = _parse_inputs(args, cfg)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ValueError("--values must name at least one sweep point")
    if args.kind == "demand":
        multipliers = [float(v) for v in values]
        table = demand_sweep(network, od, multipliers, cfg, threads=args.threads)
        plot_header = ["multiplier", "deviation_nominal_pct", "deviation_projected_pct",
                       "deviation_bound_pct"]
        plot_rows = [
            [r.param, r.deviation_nominal_pct, r.deviation_projected_pct, r.deviation_bound_pct]
            for r in table.rows
        ]
    else:
        budgets = [int(v) for v in values]
        table = budget_sweep(network, od, budgets, args.multiplier, cfg, threads=args.threads)
        plot_header = ["budget", "objective_budgeted", "eq_objective_budgeted"]
        plot_rows = [[int(r.param), r.objective_budgeted, r.eq_objective_budgeted] for r in table.rows]

    out = _out_path(args, args.out)
    write_result(table, out, "csv")
    plot_path = out.with_name(out.stem + ".plot.csv")
    write_result((plot_header, plot_rows), plot_path, "csv")
    converged = all(r.tap_converged for r in table.rows)
    diagnostics = {"kind": args.kind, "points": len(table.rows), "tap_converged": converged}
    _write_manifest(out, args, cfg, _input_files(args), [out, plot_path], diagnostics, started)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def _cmd_audit(args, cfg: RunConfig) -> int:
    started = time.monotonic()
    network, od = _parse_inputs(args, cfg)
    audit = audit_single_reversals(
        network, od, network.nominal_lanes(), cfg, sample=args.sample, threads=args.threads
    )
    out = _out_path(args, args.out)
    write_result(audit, out, "csv")
    diagnostics = {
        "baseline_objective": audit.baseline_objective,
        "tolerance": audit.tolerance,
        "pairs_audited": len(audit.sampled_pairs),
        "violations": len(audit.violations),
    }
    _write_manifest(out, args, cfg, _input_files(args), [out], diagnostics, started)
    return EXIT_OK


def _cmd_validate(args, cfg: RunConfig) -> int:
    network = parse_network(args.net, args.lanes, cfg)
    stats = {
        "nodes": network.num_nodes,
        "arcs": network.num_arcs,
        "pairs": len(network.pairs),
        "total_lanes": network.nominal_lanes().total(),
        "strongly_connected": network.is_strongly_connected(),
    }
    if args.trips:
        od = parse_demand(args.trips, 1.0, network)
        stats["od_pairs"] = len(od)
        stats["total_demand"] = od.total_demand
    for key, value in stats.items():
        print(f"{key}: {format_float(value) if isinstance(value, float) else value}")
    if args.out:
        out = _out_path(args, args.out)
        out.write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


_COMMANDS = {
    "tap": _cmd_tap,
    "optimize": _cmd_optimize,
    "sweep": _cmd_sweep,
    "audit": _cmd_audit,
    "validate": _cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._argv = argv
    try:
        if getattr(args, "multiplier", 1.0) is not None and getattr(args, "multiplier", 1.0) <= 0:
            parser.error("--multiplier must be positive")
        cfg = _load_config(args)
        return _COMMANDS[args.command](args, cfg)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ParseError, FileNotFoundError, LaneInfeasibleError, TapInfeasibleError, ValueError) as exc:
        print(f"contraflow: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
