"""Experiment pipelines composing assignment and lane optimization.

Provides the full planning workflows: a sequential scheme that alternates
equilibrating flows with re-optimizing lanes, demand-multiplier sweeps
comparing strategies (nominal lanes, optimal assignment, projected
relaxation, certified lower bound), reversal-budget sweeps, per-arc
travel-time improvement tables, and the expensive single-reversal audit
that re-solves an assignment per candidate reversal.

Strategy objectives are reported in two regimes: at the fixed flows of the
baseline assignment (where the bound ordering is provable) and after
re-solving the assignment at the new lanes (the deployment regime).
Fixed-flow columns of integer strategies are evaluated through the
piecewise tables so they are directly comparable with solver objectives.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .laneopt import (
    LaProblem,
    RelaxedBoundResult,
    evaluate_lanes,
    project_bound,
    relaxed_lower_bound,
    solve_lane_assignment,
    solve_lane_assignment_budget,
)
from .model import FlowVector, LaneConfig, Network, ODMatrix, PairState, reversal_delta_estimate, total_cost
from .netio import RunConfig
from .tap import TapInfeasibleError, TapSettings, TapSolution, solve_tap

FULL_AUDIT_PAIR_LIMIT = 64


def _tap_settings(config: RunConfig, mode: str) -> TapSettings:
    return TapSettings(
        mode=mode,
        rel_gap_tol=config.fw_rel_gap,
        max_iterations=config.fw_max_iters,
        line_search_tol=config.fw_line_search_tol,
    )


def _relaxed(network: Network, flows: FlowVector, config: RunConfig) -> RelaxedBoundResult:
    return relaxed_lower_bound(
        network,
        flows,
        xi=config.lb_xi,
        step=config.lb_step,
        max_sweeps=config.lb_max_sweeps,
    )


@dataclass(frozen=True)
class SweepRow:
    """One sweep point: strategy objectives in both regimes plus diagnostics."""

    kind: str
    param: float
    objective_nominal: float
    objective_assigned: float
    objective_budgeted: float | None
    objective_projected: float | None
    bound_relaxed: float | None
    eq_objective_nominal: float
    eq_objective_assigned: float | None
    eq_objective_budgeted: float | None
    eq_objective_projected: float | None
    deviation_assigned_pct: float
    deviation_nominal_pct: float
    deviation_projected_pct: float | None
    deviation_bound_pct: float | None
    deviation_budgeted_pct: float | None
    reversals: int
    tap_gap: float
    tap_iterations: int
    tap_converged: bool


SWEEP_COLUMNS = [
    "kind",
    "param",
    "objective_nominal",
    "objective_assigned",
    "objective_budgeted",
    "objective_projected",
    "bound_relaxed",
    "eq_objective_nominal",
    "eq_objective_assigned",
    "eq_objective_budgeted",
    "eq_objective_projected",
    "deviation_assigned_pct",
    "deviation_nominal_pct",
    "deviation_projected_pct",
    "deviation_bound_pct",
    "deviation_budgeted_pct",
    "reversals",
    "tap_gap",
    "tap_iterations",
    "tap_converged",
]


@dataclass(frozen=True)
class SweepTable:
    rows: tuple[SweepRow, ...]

    def to_table(self) -> tuple[list[str], list[list]]:
        return SWEEP_COLUMNS, [[getattr(r, c) for c in SWEEP_COLUMNS] for r in self.rows]

    def to_json_payload(self) -> dict:
        return {"rows": [dict(zip(SWEEP_COLUMNS, row)) for row in self.to_table()[1]]}


def _pct(value: float, reference: float) -> float:
    if reference == 0:
        return 0.0
    return 100.0 * (value - reference) / reference


def _demand_point(
    network: Network, od: ODMatrix, multiplier: float, config: RunConfig, mode: str
) -> SweepRow:
    nominal = network.nominal_lanes()
    od_m = od.with_multiplier(multiplier)
    base = solve_tap(network, nominal, od_m, _tap_settings(config, mode))
    problem = LaProblem.from_network(network, base.flows)
    assigned = solve_lane_assignment(problem)
    relaxed = _relaxed(network, base.flows, config)
    projected = project_bound(network, relaxed.lanes, base.flows, nominal)

    obj_nominal = evaluate_lanes(problem, nominal)
    obj_assigned = assigned.objective
    obj_projected = evaluate_lanes(problem, projected)

    eq_assigned = solve_tap(network, assigned.lanes, od_m, _tap_settings(config, mode))
    eq_projected = solve_tap(network, projected, od_m, _tap_settings(config, mode))

    return SweepRow(
        kind="demand",
        param=multiplier,
        objective_nominal=obj_nominal,
        objective_assigned=obj_assigned,
        objective_budgeted=None,
        objective_projected=obj_projected,
        bound_relaxed=relaxed.bound,
        eq_objective_nominal=base.total_cost,
        eq_objective_assigned=eq_assigned.total_cost,
        eq_objective_budgeted=None,
        eq_objective_projected=eq_projected.total_cost,
        deviation_assigned_pct=_pct(obj_assigned, obj_assigned),
        deviation_nominal_pct=_pct(obj_nominal, obj_assigned),
        deviation_projected_pct=_pct(obj_projected, obj_assigned),
        deviation_bound_pct=_pct(relaxed.bound, obj_assigned),
        deviation_budgeted_pct=None,
        reversals=assigned.reversals,
        tap_gap=base.relative_gap,
        tap_iterations=base.iterations,
        tap_converged=base.converged,
    )


def demand_sweep(
    network: Network,
    od: ODMatrix,
    multipliers: list[float],
    config: RunConfig = RunConfig(),
    mode: str = "so",
    threads: int = 1,
) -> SweepTable:
    """Compare lane strategies across demand levels.

    For each multiplier: equilibrate at nominal lanes, optimize lanes on
    the fixed flows, compute the relaxed bound and its projection, then
    re-equilibrate at each resulting configuration for the honest
    comparison columns.
    """
    if any(m <= 0 for m in multipliers):
        raise ValueError("demand multipliers must be positive")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda m: _demand_point(network, od, m, config, mode), multipliers))
    else:
        rows = [_demand_point(network, od, m, config, mode) for m in multipliers]
    return SweepTable(tuple(rows))


def budget_sweep(
    network: Network,
    od: ODMatrix,
    budgets: list[int],
    multiplier: float = 1.0,
    config: RunConfig = RunConfig(),
    mode: str = "so",
    threads: int = 1,
) -> SweepTable:
    """Trade off the number of allowed reversals against the objective.

    One baseline assignment at nominal lanes feeds every budget point; the
    budgeted solutions are re-equilibrated individually.  The fixed-flow
    objective column is nonincreasing in the budget.
    """
    if any(b < 0 or b != int(b) for b in budgets):
        raise ValueError("budgets must be nonnegative integers")
    if list(budgets) != sorted(budgets):
        raise ValueError("budgets must be ascending")
    nominal = network.nominal_lanes()
    od_m = od.with_multiplier(multiplier)
    base = solve_tap(network, nominal, od_m, _tap_settings(config, mode))
    problem = LaProblem.from_network(network, base.flows)
    assigned = solve_lane_assignment(problem)
    obj_nominal = evaluate_lanes(problem, nominal)

    def point(budget: int) -> SweepRow:
        result = solve_lane_assignment_budget(replace(problem, budget=int(budget)))
        eq = solve_tap(network, result.lanes, od_m, _tap_settings(config, mode))
        return SweepRow(
            kind="budget",
            param=float(budget),
            objective_nominal=obj_nominal,
            objective_assigned=assigned.objective,
            objective_budgeted=result.objective,
            objective_projected=None,
            bound_relaxed=None,
            eq_objective_nominal=base.total_cost,
            eq_objective_assigned=None,
            eq_objective_budgeted=eq.total_cost,
            eq_objective_projected=None,
            deviation_assigned_pct=_pct(assigned.objective, assigned.objective),
            deviation_nominal_pct=_pct(obj_nominal, assigned.objective),
            deviation_projected_pct=None,
            deviation_bound_pct=None,
            deviation_budgeted_pct=_pct(result.objective, assigned.objective),
            reversals=result.reversals,
            tap_gap=base.relative_gap,
            tap_iterations=base.iterations,
            tap_converged=base.converged,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(point, budgets))
    else:
        rows = [point(b) for b in budgets]
    return SweepTable(tuple(rows))


@dataclass(frozen=True)
class ArcImprovement:
    """Travel-time change on one flow-carrying arc after a lane change."""

    arc: int
    init: int
    term: int
    flow: float
    improvement_pct: float
    partner_init: int | None
    partner_term: int | None


@dataclass(frozen=True)
class ArcImprovementTable:
    rows: tuple[ArcImprovement, ...]

    def to_table(self) -> tuple[list[str], list[list]]:
        header = ["init", "term", "flow", "improvement_pct", "partner_init", "partner_term"]
        return header, [
            [r.init, r.term, r.flow, r.improvement_pct, r.partner_init, r.partner_term]
            for r in self.rows
        ]


def arc_improvements(
    network: Network, flows: FlowVector, lanes_before: LaneConfig, lanes_after: LaneConfig
) -> ArcImprovementTable:
    """Percent travel-time improvement per arc at fixed flows.

    Only arcs carrying flow are reported.  Positive values mean the arc got
    faster; arcs that lose lanes to their partner come out negative.
    """
    rows = []
    for arc in network.arcs:
        x = flows[arc.id]
        if x <= 0:
            continue
        before = arc.time(x, lanes_before[arc.id])
        after = arc.time(x, lanes_after[arc.id])
        pair_idx = network.pair_index_of(arc.id)
        partner = None
        if pair_idx is not None:
            pair = network.pairs[pair_idx]
            partner_id = pair.backward if pair.forward == arc.id else pair.forward
            partner = network.arcs[partner_id]
        rows.append(
            ArcImprovement(
                arc=arc.id,
                init=arc.tail,
                term=arc.head,
                flow=x,
                improvement_pct=100.0 * (before - after) / before,
                partner_init=None if partner is None else partner.tail,
                partner_term=None if partner is None else partner.head,
            )
        )
    rows.sort(key=lambda r: (r.init, r.term))
    return ArcImprovementTable(tuple(rows))


@dataclass(frozen=True)
class SequentialIterate:
    index: int
    lanes: LaneConfig
    objective: float
    accepted: bool
    reversals_from_nominal: int
    tap_gap: float
    tap_iterations: int
    tap_converged: bool


@dataclass(frozen=True)
class SequentialResult:
    """Best iterate of the alternating assignment / lane-optimization loop."""

    lanes: LaneConfig
    solution: TapSolution = field(repr=False)
    objective: float
    trace: tuple[SequentialIterate, ...]
    stop_reason: str


def sequential_lane_optimization(
    network: Network,
    od: ODMatrix,
    config: RunConfig = RunConfig(),
    mode: str = "so",
    max_outer: int = 20,
    rel_improvement_tol: float = 1e-6,
) -> SequentialResult:
    """Alternate equilibrating flows and re-optimizing lanes until stable.

    Every candidate configuration is scored by a fresh assignment solve;
    candidates are accepted only on sufficient relative improvement, so the
    accepted-objective trace is nonincreasing.  Stops at a lane fixed
    point, on a repeated configuration, when improvement stalls, or at the
    outer iteration cap.
    """
    settings = _tap_settings(config, mode)
    lanes = network.nominal_lanes()
    solution = solve_tap(network, lanes, od, settings)
    objective = solution.total_cost
    nominal = lanes

    def reversals(cfg: LaneConfig) -> int:
        return int(np.abs(cfg.lanes - nominal.lanes).sum()) // 2

    trace = [
        SequentialIterate(
            0, lanes, objective, True, 0, solution.relative_gap, solution.iterations, solution.converged
        )
    ]
    seen = {lanes.lanes.tobytes()}
    best = (lanes, solution, objective)
    stop_reason = "max_iterations"
    for outer in range(1, max_outer + 1):
        candidate = solve_lane_assignment(LaProblem.from_network(network, solution.flows)).lanes
        if candidate == lanes:
            stop_reason = "fixed_point"
            break
        if candidate.lanes.tobytes() in seen:
            stop_reason = "cycle"
            break
        try:
            cand_solution = solve_tap(network, candidate, od, settings)
        except TapInfeasibleError:
            stop_reason = "tap_infeasible"
            break
        cand_objective = cand_solution.total_cost
        accepted = cand_objective < objective - rel_improvement_tol * abs(objective)
        trace.append(
            SequentialIterate(
                outer,
                candidate,
                cand_objective,
                accepted,
                reversals(candidate),
                cand_solution.relative_gap,
                cand_solution.iterations,
                cand_solution.converged,
            )
        )
        if not accepted:
            stop_reason = "no_improvement"
            break
        seen.add(candidate.lanes.tobytes())
        lanes, solution, objective = candidate, cand_solution, cand_objective
        best = (lanes, solution, objective)
    return SequentialResult(best[0], best[1], best[2], tuple(trace), stop_reason)


@dataclass(frozen=True)
class ReversalAuditRow:
    """Exact and estimated objective change for one candidate reversal."""

    pair_index: int
    gaining_init: int
    gaining_term: int
    feasible: bool
    exact_delta: float | None
    estimate_delta: float | None
    neighbor_gap: float | None
    neighbor_converged: bool | None
    error: str | None
    violation: bool


@dataclass(frozen=True)
class ReversalAudit:
    """Single-reversal optimality audit of a lane configuration.

    A violation is a feasible reversal whose re-equilibrated objective
    drops by more than the tolerance, i.e. an improvement the audited
    configuration missed.  The tolerance absorbs assignment solver noise:
    both objectives are only known to their relative-gap accuracy.
    """

    baseline_objective: float
    tolerance: float
    sampled_pairs: tuple[int, ...]
    rows: tuple[ReversalAuditRow, ...]

    @property
    def violations(self) -> tuple[ReversalAuditRow, ...]:
        return tuple(r for r in self.rows if r.violation)

    def to_table(self) -> tuple[list[str], list[list]]:
        header = [
            "pair_index",
            "gaining_init",
            "gaining_term",
            "feasible",
            "exact_delta",
            "estimate_delta",
            "neighbor_gap",
            "neighbor_converged",
            "violation",
            "error",
        ]
        rows = [
            [
                r.pair_index,
                r.gaining_init,
                r.gaining_term,
                r.feasible,
                r.exact_delta,
                r.estimate_delta,
                r.neighbor_gap,
                r.neighbor_converged,
                r.violation,
                r.error or "",
            ]
            for r in self.rows
        ]
        return header, rows

    def to_json_payload(self) -> dict:
        header, rows = self.to_table()
        return {
            "baseline_objective": self.baseline_objective,
            "tolerance": self.tolerance,
            "sampled_pairs": list(self.sampled_pairs),
            "violations": len(self.violations),
            "rows": [dict(zip(header, row)) for row in rows],
        }


def audit_single_reversals(
    network: Network,
    od: ODMatrix,
    lanes: LaneConfig,
    config: RunConfig = RunConfig(),
    mode: str = "so",
    sample: int | None = None,
    threads: int = 1,
    violation_tol: float | None = None,
) -> ReversalAudit:
    """Measure the exact objective change of every candidate single reversal.

    For each audited pair and direction, re-solves the assignment at the
    neighboring configuration (one lane moved) and reports the exact
    objective change next to the fixed-flow estimate.  Neighbor solve
    failures are recorded and the audit continues.  With more pairs than
    ``FULL_AUDIT_PAIR_LIMIT`` and no explicit ``sample``, a seeded sample
    of that size is audited.
    """
    settings = _tap_settings(config, mode)
    baseline = solve_tap(network, lanes, od, settings)
    baseline_objective = baseline.total_cost
    tol = (
        violation_tol
        if violation_tol is not None
        else 2.0 * settings.rel_gap_tol * abs(baseline_objective)
    )

    indices = list(range(len(network.pairs)))
    if sample is None and len(indices) > FULL_AUDIT_PAIR_LIMIT:
        sample = FULL_AUDIT_PAIR_LIMIT
    if sample is not None and sample < len(indices):
        rng = random.Random(config.seed)
        indices = sorted(rng.sample(indices, sample))

    tasks = [(k, direction) for k in indices for direction in ("forward", "backward")]

    def run(task: tuple[int, str]) -> ReversalAuditRow:
        k, direction = task
        pair = network.pairs[k]
        state = PairState.from_network(network, k, lanes, baseline.flows)
        gaining_arc = network.arcs[pair.forward if direction == "forward" else pair.backward]
        losing_id = pair.backward if direction == "forward" else pair.forward
        estimate = reversal_delta_estimate(state, direction)
        new_losing = lanes[losing_id] - 1
        feasible = new_losing >= pair.min_lanes
        if not feasible:
            return ReversalAuditRow(k, gaining_arc.tail, gaining_arc.head, False, None, estimate,
                                    None, None, None, False)
        neighbor = lanes.with_pair_split(
            network, k, lanes[pair.forward] + (1 if direction == "forward" else -1)
        )
        try:
            sol = solve_tap(network, neighbor, od, settings)
        except TapInfeasibleError as exc:
            return ReversalAuditRow(k, gaining_arc.tail, gaining_arc.head, True, None, estimate,
                                    None, None, str(exc), False)
        exact = sol.total_cost - baseline_objective
        return ReversalAuditRow(
            pair_index=k,
            gaining_init=gaining_arc.tail,
            gaining_term=gaining_arc.head,
            feasible=True,
            exact_delta=exact,
            estimate_delta=estimate,
            neighbor_gap=sol.relative_gap,
            neighbor_converged=sol.converged,
            error=None,
            violation=exact < -tol,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, tasks))
    else:
        rows = [run(t) for t in tasks]
    return ReversalAudit(baseline_objective, tol, tuple(indices), tuple(rows))
