"""Fixed-flow lane assignment: exact solver, certified bounds, budgeted variant.

With flows held fixed the network cost separates over arc pairs, and each
pair's cost as a function of its lane split is convex with integer
breakpoints.  The exact solver therefore scans every feasible integer split
per pair; a continuous relaxation yields a certified lower bound (its
per-pair optimum has a closed form), rounding that relaxation gives a cheap
upper bound, and a greedy over single-lane moves solves the
reversal-budget-constrained variant exactly thanks to the nondecreasing
per-move deltas.  Brute-force enumerators are provided as test oracles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    FlowVector,
    LaneConfig,
    LaneInfeasibleError,
    Network,
    PairState,
    PiecewiseCost,
    arc_costs,
    build_piecewise,
    pair_gradient,
    split_bounds,
    total_cost,
)


class InstanceTooLargeError(ValueError):
    """A brute-force oracle was asked to enumerate too many configurations."""


@dataclass(frozen=True)
class PairProblem:
    """One pair's piece of a lane-assignment problem."""

    index: int
    forward_arc: int
    backward_arc: int
    total_lanes: int
    lo: int
    hi: int
    nominal_forward: int
    forward_cost: PiecewiseCost
    backward_cost: PiecewiseCost

    def split_cost(self, forward_lanes: int) -> float:
        return self.forward_cost.cost_at(forward_lanes) + self.backward_cost.cost_at(
            self.total_lanes - forward_lanes
        )

    def split_costs(self) -> list[float]:
        """Cost of every feasible split, indexed by ``forward_lanes - lo``."""
        return [self.split_cost(s) for s in range(self.lo, self.hi + 1)]


@dataclass(frozen=True)
class LaProblem:
    """Lane-assignment instance: fixed flows, per-pair cost tables, optional budget."""

    network: Network = field(repr=False)
    flows: FlowVector = field(repr=False)
    pairs: tuple[PairProblem, ...]
    fixed_cost: float
    budget: int | None = None

    def __post_init__(self) -> None:
        if self.budget is not None and self.budget < 0:
            raise ValueError("reversal budget must be >= 0")

    @classmethod
    def from_network(
        cls, network: Network, flows: FlowVector, *, budget: int | None = None
    ) -> "LaProblem":
        pair_problems = []
        for k, pair in enumerate(network.pairs):
            state = PairState.from_network(network, k, network.nominal_lanes(), flows)
            lo, hi = split_bounds(state)
            fwd_cost, bwd_cost = build_piecewise(state)
            pair_problems.append(
                PairProblem(
                    index=k,
                    forward_arc=pair.forward,
                    backward_arc=pair.backward,
                    total_lanes=pair.total_lanes,
                    lo=lo,
                    hi=hi,
                    nominal_forward=network.arcs[pair.forward].lanes_nominal,
                    forward_cost=fwd_cost,
                    backward_cost=bwd_cost,
                )
            )
        paired = {a for p in network.pairs for a in (p.forward, p.backward)}
        fixed = 0.0
        for arc in network.arcs:
            if arc.id not in paired:
                fixed += arc.cost(flows[arc.id], arc.lanes_nominal)
        return cls(network, flows, tuple(pair_problems), fixed, budget)


@dataclass(frozen=True, eq=False)
class LaneOptResult:
    """Outcome of a lane-assignment solve at fixed flows.

    ``objective`` comes from the piecewise tables (exact at integer splits
    up to rounding); the per-arc cost vectors are evaluated with the direct
    cost formula for reporting.
    """

    network: Network = field(repr=False)
    flows: FlowVector = field(repr=False)
    lanes: LaneConfig
    objective: float
    nominal_lanes: LaneConfig = field(repr=False)
    arc_costs_nominal: np.ndarray = field(repr=False)
    arc_costs_optimal: np.ndarray = field(repr=False)
    reversals: int
    budget: int | None = None
    relaxed_bound: float | None = None
    projected_objective: float | None = None

    def arc_rows(self) -> list[dict]:
        """Per-arc report rows sorted by (tail, head)."""
        rows = []
        for arc in self.network.arcs:
            z0 = int(self.nominal_lanes[arc.id])
            z1 = int(self.lanes[arc.id])
            rows.append(
                {
                    "init": arc.tail,
                    "term": arc.head,
                    "flow": self.flows[arc.id],
                    "z0": z0,
                    "z_opt": z1,
                    "delta": z1 - z0,
                    "cost_z0": float(self.arc_costs_nominal[arc.id]),
                    "cost_opt": float(self.arc_costs_optimal[arc.id]),
                }
            )
        rows.sort(key=lambda r: (r["init"], r["term"]))
        return rows

    def to_table(self) -> tuple[list[str], list[list]]:
        header = ["init", "term", "flow", "z0", "z_opt", "delta", "cost_z0", "cost_opt"]
        return header, [[r[k] for k in header] for r in self.arc_rows()]

    def summary(self) -> dict:
        out = {
            "objective": self.objective,
            "reversals": self.reversals,
            "budget": self.budget,
            "total_lanes": self.nominal_lanes.total(),
            "relaxed_bound": self.relaxed_bound,
            "projected_objective": self.projected_objective,
        }
        return out

    def to_json_payload(self) -> dict:
        return {"summary": self.summary(), "arcs": self.arc_rows()}


def _pick_split(costs: list[float], lo: int, nominal_forward: int) -> tuple[int, float]:
    """Argmin split with deterministic ties: closest to nominal, then more forward lanes."""
    best = min(
        (cost, abs(lo + i - nominal_forward), -(lo + i), lo + i) for i, cost in enumerate(costs)
    )
    return best[3], best[0]


def _result_from_splits(problem: LaProblem, splits: dict[int, int], objective: float,
                        budget: int | None = None) -> LaneOptResult:
    lanes_arr = np.array(problem.network.lanes_nominal, copy=True)
    reversals = 0
    for pp in problem.pairs:
        s = splits[pp.index]
        lanes_arr[pp.forward_arc] = s
        lanes_arr[pp.backward_arc] = pp.total_lanes - s
        reversals += abs(s - pp.nominal_forward)
    lanes = LaneConfig(lanes_arr)
    nominal = problem.network.nominal_lanes()
    return LaneOptResult(
        network=problem.network,
        flows=problem.flows,
        lanes=lanes,
        objective=objective,
        nominal_lanes=nominal,
        arc_costs_nominal=arc_costs(problem.network, nominal, problem.flows),
        arc_costs_optimal=arc_costs(problem.network, lanes, problem.flows),
        reversals=reversals,
        budget=budget,
    )


def solve_lane_assignment(problem: LaProblem) -> LaneOptResult:
    """Exact optimum over integer lane splits, one independent scan per pair.

    The coupling constraints touch only the two directions of a pair, so
    the network problem decomposes; each pair contributes the minimum of
    its split-cost table.
    """
    if problem.budget is not None:
        raise ValueError("problem has a reversal budget; use solve_lane_assignment_budget")
    objective = problem.fixed_cost
    splits: dict[int, int] = {}
    for pp in problem.pairs:
        s, cost = _pick_split(pp.split_costs(), pp.lo, pp.nominal_forward)
        splits[pp.index] = s
        objective += cost
    return _result_from_splits(problem, splits, objective)


@dataclass(frozen=True)
class PairIntegralityReport:
    pair_index: int
    relaxed_value: float
    integer_value: float
    integral: bool
    optimal_splits: tuple[int, ...]


@dataclass(frozen=True)
class IntegralityReport:
    """Continuous relaxation of the per-pair split LP versus the integer optimum."""

    integral: bool
    relaxed_objective: float
    integer_objective: float
    pairs: tuple[PairIntegralityReport, ...]


def check_relaxation_integrality(problem: LaProblem) -> IntegralityReport:
    """Solve each pair's continuous split relaxation and test for integral optima.

    The relaxed objective is piecewise linear in the continuous split with
    integer breakpoints, so over the split interval its minimum is attained
    at a breakpoint; flat segments only widen the optimal set and their
    endpoints are integers.  The report carries the relaxed and integer
    values per pair (they must coincide) and all minimizing integer splits.
    """
    if problem.budget is not None:
        raise ValueError("integrality check applies to the unbudgeted problem")
    reports = []
    relaxed_total = problem.fixed_cost
    integer_total = problem.fixed_cost
    for pp in problem.pairs:
        costs = pp.split_costs()
        relaxed_value = min(costs)
        _, integer_value = _pick_split(costs, pp.lo, pp.nominal_forward)
        optima = tuple(pp.lo + i for i, c in enumerate(costs) if c == relaxed_value)
        reports.append(
            PairIntegralityReport(
                pair_index=pp.index,
                relaxed_value=relaxed_value,
                integer_value=integer_value,
                integral=relaxed_value == integer_value,
                optimal_splits=optima,
            )
        )
        relaxed_total += relaxed_value
        integer_total += integer_value
    return IntegralityReport(
        integral=all(r.integral for r in reports),
        relaxed_objective=relaxed_total,
        integer_objective=integer_total,
        pairs=tuple(reports),
    )


def evaluate_lanes(problem: LaProblem, lanes: LaneConfig) -> float:
    """Objective of an explicit configuration under the problem's fixed flows.

    Uses the piecewise tables when the split lies in the feasible range so
    values are directly comparable with solver objectives; falls back to
    the direct cost formula otherwise.
    """
    total = problem.fixed_cost
    for pp in problem.pairs:
        s = lanes[pp.forward_arc]
        sb = lanes[pp.backward_arc]
        if sb == pp.total_lanes - s and pp.lo <= s <= pp.hi:
            total += pp.split_cost(s)
        else:
            net = problem.network
            total += net.arcs[pp.forward_arc].cost(problem.flows[pp.forward_arc], s)
            total += net.arcs[pp.backward_arc].cost(problem.flows[pp.backward_arc], sb)
    return total


@dataclass(frozen=True, eq=False)
class RelaxedBoundResult:
    """Continuous-lane relaxation outcome.

    ``bound`` is the certified lower bound: the sum of each pair's exact
    relaxed optimum (closed form) plus the cost of non-reversible arcs.
    ``value`` is the cost at the iteratively computed relaxed lane vector,
    which converges to ``bound`` from above.
    """

    lanes: np.ndarray
    value: float
    bound: float
    converged: bool
    sweeps: int
    gradient_norm: float


def _pair_relaxed_optimum(state: PairState) -> tuple[float, float]:
    """Exact minimizer and value of one pair's cost over continuous splits.

    For equal BPR powers the stationary split has the closed form
    ``n * a / (a + b)`` with ``a = gamma_f**(1/(p+1)) * x_f`` and
    ``b = gamma_b**(1/(p+1)) * x_b``; mixed powers fall back to a bisection
    on the monotone pair gradient.
    """
    lo, hi = split_bounds(state)
    n = state.total_lanes
    xf, xb = state.flow_forward, state.flow_backward
    fwd, bwd = state.forward, state.backward

    if xf == 0 and xb == 0:
        z = min(max(state.lanes_forward, lo), hi)
    elif xb == 0:
        z = float(hi)
    elif xf == 0:
        z = float(lo)
    elif fwd.power == bwd.power:
        root = 1.0 / (fwd.power + 1.0)
        a = fwd.gamma**root * xf
        b = bwd.gamma**root * xb
        z = min(max(n * a / (a + b), float(lo)), float(hi))
    else:
        z = _gradient_bisection(state, float(lo), float(hi))
    value = fwd.cost(xf, z) + bwd.cost(xb, n - z)
    return float(z), value


def _gradient_bisection(state: PairState, lo: float, hi: float) -> float:
    def grad_at(z: float) -> float:
        return pair_gradient(replace(state, lanes_forward=z, lanes_backward=state.total_lanes - z))

    eps = 1e-12 * max(1.0, hi - lo)
    a, b = max(lo, eps), hi - eps
    if grad_at(a) >= 0:
        return lo
    if grad_at(b) <= 0:
        return hi
    while b - a > 1e-13 * max(1.0, hi):
        mid = 0.5 * (a + b)
        if grad_at(mid) < 0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def relaxed_lower_bound(
    network: Network,
    flows: FlowVector,
    *,
    xi: float = 1e-6,
    step: float = 0.25,
    max_sweeps: int = 20000,
    interior_floor: float = 1e-3,
) -> RelaxedBoundResult:
    """Lower-bound the integer lane-assignment optimum by continuous relaxation.

    Runs a projected coordinate descent over the pairs: each sweep takes a
    gradient step per pair, projects the split onto its box, halves the
    per-pair step on a cost increase and grows it by 1.1 on a decrease.
    Iterates keep a small positive floor on each direction so gradients
    stay defined; the certified ``bound`` is evaluated from the exact
    closed-form per-pair optima and is independent of iteration accuracy.
    Stops when the projected-gradient norm drops below ``xi``, when no
    coordinate moves, or at the sweep limit (flagged as unconverged).
    """
    if xi <= 0:
        raise ValueError("xi must be positive")
    lanes = np.array(network.lanes_nominal, dtype=np.float64)
    boxes: list[tuple[int, float, float] | None] = []
    bound = 0.0
    paired = {a for p in network.pairs for a in (p.forward, p.backward)}
    for arc in network.arcs:
        if arc.id not in paired:
            bound += arc.cost(flows[arc.id], arc.lanes_nominal)

    for k, pair in enumerate(network.pairs):
        state = PairState.from_network(network, k, lanes, flows)
        z_opt, value = _pair_relaxed_optimum(state)
        bound += value
        floor = max(pair.min_lanes, interior_floor)
        lo, hi = floor, pair.total_lanes - floor
        if lo > hi:
            # Too narrow to iterate on; pin at the exact relaxed optimum.
            lanes[pair.forward] = z_opt
            lanes[pair.backward] = pair.total_lanes - z_opt
            boxes.append(None)
        else:
            lanes[pair.forward] = min(max(lanes[pair.forward], lo), hi)
            lanes[pair.backward] = pair.total_lanes - lanes[pair.forward]
            boxes.append((k, lo, hi))

    steps = [step] * len(network.pairs)
    resolution = 1e-12 * max(1.0, float(lanes.max(initial=1.0)))
    grad_norm = math.inf
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        largest_attempt = 0.0
        for box in boxes:
            if box is None:
                continue
            k, lo, hi = box
            pair = network.pairs[k]
            state = PairState.from_network(network, k, lanes, flows)
            grad = pair_gradient(state)
            z_new = min(max(state.lanes_forward - steps[k] * grad, lo), hi)
            if z_new == state.lanes_forward:
                continue
            largest_attempt = max(largest_attempt, abs(z_new - state.lanes_forward))
            before = state.cost()
            after = state.forward.cost(state.flow_forward, z_new) + state.backward.cost(
                state.flow_backward, pair.total_lanes - z_new
            )
            if after < before:
                lanes[pair.forward] = z_new
                lanes[pair.backward] = pair.total_lanes - z_new
                steps[k] *= 1.1
            else:
                steps[k] *= 0.5

        grad_norm = 0.0
        for box in boxes:
            if box is None:
                continue
            k, lo, hi = box
            state = PairState.from_network(network, k, lanes, flows)
            grad = pair_gradient(state)
            if state.lanes_forward <= lo:
                grad = min(grad, 0.0)
            elif state.lanes_forward >= hi:
                grad = max(grad, 0.0)
            grad_norm += grad * grad
        grad_norm = math.sqrt(grad_norm)
        if grad_norm < xi:
            converged = True
            break
        if largest_attempt < resolution:
            # No coordinate can make a numerically resolvable move: the
            # iterate is converged even if xi is below the noise floor of
            # the gradient at this problem's scale.
            converged = True
            break

    lanes.setflags(write=False)
    value = total_cost(network, lanes, flows)
    return RelaxedBoundResult(
        lanes=lanes,
        value=value,
        bound=bound,
        converged=converged,
        sweeps=sweeps,
        gradient_norm=grad_norm,
    )


def project_bound(
    network: Network,
    relaxed_lanes: np.ndarray,
    flows: FlowVector,
    nominal: LaneConfig | None = None,
) -> LaneConfig:
    """Round a continuous lane vector to the nearest feasible integer split.

    Each pair's forward direction is rounded to the nearest integer (exact
    halves resolve toward the nominal count, then down) and clamped to the
    pair's feasible range; the backward direction takes the remainder.
    """
    nominal = network.nominal_lanes() if nominal is None else nominal
    out = np.array(network.lanes_nominal, copy=True)
    for k, pair in enumerate(network.pairs):
        z = float(relaxed_lanes[pair.forward])
        z0 = nominal[pair.forward]
        floor_z = math.floor(z)
        frac = z - floor_z
        if frac > 0.5:
            s = floor_z + 1
        elif frac < 0.5:
            s = floor_z
        else:
            up, down = floor_z + 1, floor_z
            if abs(up - z0) < abs(down - z0):
                s = up
            else:
                s = down
        state = PairState.from_network(network, k, network.nominal_lanes(), flows)
        lo, hi = split_bounds(state)
        s = min(max(s, lo), hi)
        out[pair.forward] = s
        out[pair.backward] = pair.total_lanes - s
    return LaneConfig(out)


def solve_lane_assignment_budget(problem: LaProblem) -> LaneOptResult:
    """Best configuration reachable with at most ``budget`` single-lane moves.

    Greedily applies the single-lane move with the most negative cost delta
    until the budget is spent or no strictly improving move remains.  By
    convexity each pair's successive deltas toward its optimum are
    nondecreasing in magnitude-consumed order, so the greedy is exact.
    """
    if problem.budget is None:
        raise ValueError("problem has no reversal budget; use solve_lane_assignment")
    splits: dict[int, int] = {}
    tables: dict[int, list[float]] = {}
    for pp in problem.pairs:
        if not pp.lo <= pp.nominal_forward <= pp.hi:
            raise LaneInfeasibleError(
                f"nominal split {pp.nominal_forward} of pair {pp.index} is outside "
                f"its feasible range {pp.lo}..{pp.hi}"
            )
        splits[pp.index] = pp.nominal_forward
        tables[pp.index] = pp.split_costs()

    used = 0
    while used < problem.budget:
        best: tuple[float, int, int, int] | None = None
        for pp in problem.pairs:
            s = splits[pp.index]
            table = tables[pp.index]
            if s + 1 <= pp.hi:
                delta = table[s + 1 - pp.lo] - table[s - pp.lo]
                cand = (delta, pp.index, 0, s + 1)
                if best is None or cand < best:
                    best = cand
            if s - 1 >= pp.lo:
                delta = table[s - 1 - pp.lo] - table[s - pp.lo]
                cand = (delta, pp.index, 1, s - 1)
                if best is None or cand < best:
                    best = cand
        if best is None or best[0] >= 0:
            break
        splits[best[1]] = best[3]
        used += 1

    objective = problem.fixed_cost
    for pp in problem.pairs:
        objective += tables[pp.index][splits[pp.index] - pp.lo]
    return _result_from_splits(problem, splits, objective, budget=problem.budget)


def brute_force_pair(state: PairState, nominal_forward: int) -> tuple[int, float]:
    """Exhaustive scan of one pair's integer splits with direct cost evaluation.

    Independent oracle for the piecewise-table solver: same feasible range
    and tie-breaking, but costs come straight from the cost formula.
    """
    if state.total_lanes > 32:
        raise InstanceTooLargeError("pair oracle is limited to 32 lanes")
    lo, hi = split_bounds(state)
    candidates = []
    for s in range(lo, hi + 1):
        cost = state.forward.cost(state.flow_forward, s) + state.backward.cost(
            state.flow_backward, state.total_lanes - s
        )
        candidates.append((cost, abs(s - nominal_forward), -s, s))
    cost, _, _, s = min(candidates)
    return s, cost


def brute_force_budget(
    network: Network, flows: FlowVector, nominal: LaneConfig, budget: int
) -> tuple[LaneConfig, float]:
    """Exhaustive optimum over all feasible configurations within the budget.

    Enumerates the product of per-pair splits, filters by total lanes moved,
    and evaluates costs directly.  Guarded against combinatorial blowup.
    """
    ranges = []
    states = []
    for k, pair in enumerate(network.pairs):
        state = PairState.from_network(network, k, nominal, flows)
        lo, hi = split_bounds(state)
        ranges.append(range(lo, hi + 1))
        states.append(state)
    total = 1
    for r in ranges:
        total *= len(r)
        if total > 1_000_000:
            raise InstanceTooLargeError("budget oracle would enumerate more than 1e6 configurations")

    paired = {a for p in network.pairs for a in (p.forward, p.backward)}
    fixed = sum(
        network.arcs[a].cost(flows[a], network.arcs[a].lanes_nominal)
        for a in range(network.num_arcs)
        if a not in paired
    )

    best: tuple[float, int, tuple[int, ...]] | None = None
    for combo in itertools.product(*ranges):
        moved = sum(
            abs(s - network.arcs[network.pairs[k].forward].lanes_nominal)
            for k, s in enumerate(combo)
        )
        if moved > budget:
            continue
        cost = fixed
        for k, s in enumerate(combo):
            st = states[k]
            cost += st.forward.cost(st.flow_forward, s) + st.backward.cost(
                st.flow_backward, st.total_lanes - s
            )
        cand = (cost, moved, combo)
        if best is None or cand < best:
            best = cand
    if best is None:
        raise LaneInfeasibleError("no feasible configuration within the budget")

    lanes_arr = np.array(network.lanes_nominal, copy=True)
    for k, s in enumerate(best[2]):
        pair = network.pairs[k]
        lanes_arr[pair.forward] = s
        lanes_arr[pair.backward] = pair.total_lanes - s
    return LaneConfig(lanes_arr), best[0]
