#!/usr/bin/env python3
"""Full experiment battery on one dataset: sweeps, budget frontier, arc table.

Expects a directory holding ``<name>_net.tntp`` and ``<name>_trips.tntp``
(plus an optional ``<name>_lanes.csv``), e.g. the EMA files under
``data/ema``.  Produces, under the output directory:

  demand_sweep.csv     strategy objectives and deviations per demand level
  budget_sweep.csv     objective versus allowed number of reversals
  improvements.csv     per-arc travel-time change of the best-30-reversal plan
  summary.json         headline numbers of the unconstrained optimization
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from contraflow.laneopt import LaProblem, solve_lane_assignment, solve_lane_assignment_budget
from contraflow.model import total_cost
from contraflow.netio import RunConfig, parse_demand, parse_network, write_result
from contraflow.pipeline import arc_improvements, budget_sweep, demand_sweep
from contraflow.tap import TapSettings, solve_tap


def locate(data_dir: Path, suffix: str) -> Path | None:
    hits = sorted(data_dir.glob(f"*_{suffix}")) or sorted(data_dir.glob(suffix))
    return hits[0] if hits else None


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("data_dir", help="directory with <name>_net.tntp and <name>_trips.tntp")
    parser.add_argument("--out-dir", default="results", help="output directory")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--multipliers", default="0.5,1.0,1.5,2.0,2.5,3.0")
    parser.add_argument("--budgets", default="0,1,2,3,4,5,6,8,10,12,15,20,25,30")
    parser.add_argument("--budget-multiplier", type=float, default=1.5)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    data_dir = Path(args.data_dir)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()

    net_path = locate(data_dir, "net.tntp")
    trips_path = locate(data_dir, "trips.tntp")
    lanes_path = locate(data_dir, "lanes.csv")
    if net_path is None or trips_path is None:
        raise SystemExit(f"no *_net.tntp / *_trips.tntp files under {data_dir}")

    network = parse_network(net_path, lanes_path, cfg)
    od = parse_demand(trips_path, 1.0, network)
    print(f"{net_path.name}: {network.num_nodes} nodes, {network.num_arcs} arcs, "
          f"{len(network.pairs)} pairs, {network.nominal_lanes().total()} lanes, {len(od)} od pairs")

    started = time.perf_counter()
    multipliers = [float(v) for v in args.multipliers.split(",")]
    table = demand_sweep(network, od, multipliers, cfg, threads=args.threads)
    write_result(table, out / "demand_sweep.csv")
    print(f"demand sweep done ({time.perf_counter() - started:.1f}s)")

    budgets = sorted({int(v) for v in args.budgets.split(",")})
    btable = budget_sweep(network, od, budgets, args.budget_multiplier, cfg, threads=args.threads)
    write_result(btable, out / "budget_sweep.csv")
    print(f"budget sweep done ({time.perf_counter() - started:.1f}s)")

    od_b = od.with_multiplier(args.budget_multiplier)
    settings = TapSettings(mode="so", rel_gap_tol=cfg.fw_rel_gap, max_iterations=cfg.fw_max_iters,
                           line_search_tol=cfg.fw_line_search_tol)
    base = solve_tap(network, network.nominal_lanes(), od_b, settings)
    best30 = solve_lane_assignment_budget(LaProblem.from_network(network, base.flows, budget=30))
    imp = arc_improvements(network, base.flows, network.nominal_lanes(), best30.lanes)
    write_result(imp, out / "improvements.csv")

    unconstrained = solve_lane_assignment(LaProblem.from_network(network, base.flows))
    summary = {
        "nominal_objective": total_cost(network, network.nominal_lanes(), base.flows),
        "optimized_objective": unconstrained.objective,
        "reversals_at_optimum": unconstrained.reversals,
        "best30_objective": best30.objective,
        "best30_reversals": best30.reversals,
        "max_arc_improvement_pct": max((r.improvement_pct for r in imp.rows), default=0.0),
        "min_arc_improvement_pct": min((r.improvement_pct for r in imp.rows), default=0.0),
        "tap_gap": base.relative_gap,
        "tap_converged": base.converged,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    print(f"all experiments done in {time.perf_counter() - started:.1f}s -> {out}/")


if __name__ == "__main__":
    main()
