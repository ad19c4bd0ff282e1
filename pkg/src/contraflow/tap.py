"""Traffic assignment by Frank-Wolfe for a fixed lane configuration.

Supports two objectives over the same feasible flow set: system-optimal
(minimize total travel time, direction finding on marginal link costs) and
user-centric equilibrium (minimize the Beckmann potential, direction
finding on travel times).  Directions come from all-or-nothing assignments
on per-origin shortest-path trees; the step is an exact bisection line
search on the directional derivative.  All tie-breaking is deterministic,
so identical inputs give bitwise-identical flows.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .model import FlowVector, LaneConfig, Network, ODMatrix

MODES = ("so", "uc")


class TapInfeasibleError(RuntimeError):
    """Some origin-destination demand cannot be routed on open lanes."""


@dataclass(frozen=True)
class TapSettings:
    """Solver controls: objective mode, convergence target, iteration caps."""

    mode: str = "so"
    rel_gap_tol: float = 1e-4
    max_iterations: int = 1000
    line_search_tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES} (got {self.mode!r})")
        if self.rel_gap_tol <= 0:
            raise ValueError("relative gap tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.line_search_tol <= 0:
            raise ValueError("line search tolerance must be positive")


@dataclass(frozen=True)
class TapIterate:
    iteration: int
    objective: float
    relative_gap: float
    lower_bound: float
    bound_gap: float
    step_size: float


@dataclass(frozen=True)
class TapSolution:
    """Flows plus diagnostics of one assignment solve.

    ``objective`` is the value of the minimized objective for the chosen
    mode; ``total_cost`` is always the flow-weighted travel time.
    """

    flows: FlowVector
    objective: float
    total_cost: float
    relative_gap: float
    iterations: int
    converged: bool
    mode: str
    trace: tuple[TapIterate, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class ShortestPathTree:
    """Single-origin shortest paths: distances and predecessor links."""

    origin: int
    distances: dict[int, float]
    pred_node: dict[int, int]
    pred_arc: dict[int, int]

    def distance(self, node: int) -> float:
        return self.distances.get(node, math.inf)

    def reachable(self, node: int) -> bool:
        return node in self.distances


def travel_times(network: Network, lanes, flows) -> np.ndarray:
    """Per-arc travel times at the given lanes and flows."""
    z = np.asarray(lanes.lanes if isinstance(lanes, LaneConfig) else lanes, dtype=np.float64)
    x = np.asarray(flows.values if isinstance(flows, FlowVector) else flows, dtype=np.float64)
    safe_z = np.where(z > 0, z, 1.0)
    ratio = np.where(x > 0, x / (network.capacity * safe_z), 0.0)
    t = network.free_flow_time * (1.0 + network.alpha * ratio**network.power)
    return np.where((x > 0) & (z <= 0), np.inf, t)


def marginal_times(network: Network, lanes, flows) -> np.ndarray:
    """Derivative of total cost with respect to each arc's flow.

    For the BPR family this is ``t0 * (1 + alpha*(power+1) * ratio**power)``.
    """
    z = np.asarray(lanes.lanes if isinstance(lanes, LaneConfig) else lanes, dtype=np.float64)
    x = np.asarray(flows.values if isinstance(flows, FlowVector) else flows, dtype=np.float64)
    safe_z = np.where(z > 0, z, 1.0)
    ratio = np.where(x > 0, x / (network.capacity * safe_z), 0.0)
    t = network.free_flow_time * (1.0 + network.alpha * (network.power + 1.0) * ratio**network.power)
    return np.where((x > 0) & (z <= 0), np.inf, t)


def objective_value(network: Network, lanes, flows, mode: str) -> float:
    """Objective being minimized: total cost (so) or Beckmann potential (uc)."""
    z = np.asarray(lanes.lanes if isinstance(lanes, LaneConfig) else lanes, dtype=np.float64)
    x = np.asarray(flows.values if isinstance(flows, FlowVector) else flows, dtype=np.float64)
    safe_z = np.where(z > 0, z, 1.0)
    ratio = np.where(x > 0, x / (network.capacity * safe_z), 0.0)
    if mode == "so":
        per_arc = network.free_flow_time * x * (1.0 + network.alpha * ratio**network.power)
    elif mode == "uc":
        per_arc = network.free_flow_time * x * (
            1.0 + network.alpha / (network.power + 1.0) * ratio**network.power
        )
    else:
        raise ValueError(f"mode must be one of {MODES} (got {mode!r})")
    per_arc = np.where((x > 0) & (z <= 0), np.inf, per_arc)
    return float(per_arc.sum())


def _mode_weights(network: Network, lanes, flows, mode: str) -> np.ndarray:
    return travel_times(network, lanes, flows) if mode == "uc" else marginal_times(network, lanes, flows)


def _open_adjacency(network: Network, lanes: LaneConfig) -> dict[int, tuple[tuple[int, int], ...]]:
    z = lanes.lanes
    return {
        node: tuple((head, aid) for head, aid in network.out_arcs(node) if z[aid] >= 1)
        for node in network.nodes
    }


def _dijkstra(
    adjacency: dict[int, tuple[tuple[int, int], ...]], weights: np.ndarray, origin: int
) -> ShortestPathTree:
    distances: dict[int, float] = {origin: 0.0}
    pred_node: dict[int, int] = {}
    pred_arc: dict[int, int] = {}
    finalized: set[int] = set()
    heap: list[tuple[float, int]] = [(0.0, origin)]
    while heap:
        dist_u, u = heapq.heappop(heap)
        if u in finalized:
            continue
        finalized.add(u)
        for head, aid in adjacency[u]:
            nd = dist_u + float(weights[aid])
            old = distances.get(head)
            if old is None or nd < old:
                distances[head] = nd
                pred_node[head] = u
                pred_arc[head] = aid
                heapq.heappush(heap, (nd, head))
            elif nd == old and u < pred_node[head]:
                # Equal-length paths resolve to the smallest predecessor id.
                pred_node[head] = u
                pred_arc[head] = aid
    return ShortestPathTree(origin, distances, pred_node, pred_arc)


def shortest_paths(
    network: Network, weights: np.ndarray, origin: int, lanes: LaneConfig | None = None
) -> ShortestPathTree:
    """Exact single-origin shortest paths over arcs with open lanes.

    Weights must be nonnegative.  Unreachable nodes are simply absent from
    the returned distances.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (network.num_arcs,):
        raise ValueError("weight vector length does not match the network")
    if (weights < 0).any():
        raise ValueError("arc weights must be nonnegative")
    if origin not in set(network.nodes):
        raise ValueError(f"origin {origin} is not a network node")
    lanes = network.nominal_lanes() if lanes is None else lanes
    return _dijkstra(_open_adjacency(network, lanes), weights, origin)


def _assign(
    network: Network,
    adjacency: dict[int, tuple[tuple[int, int], ...]],
    weights: np.ndarray,
    od: ODMatrix,
) -> np.ndarray:
    flows = np.zeros(network.num_arcs)
    tails = network.tails
    for origin, dests in od.by_origin().items():
        tree = _dijkstra(adjacency, weights, origin)
        for dest, demand in dests:
            if not tree.reachable(dest):
                raise TapInfeasibleError(
                    f"demand {origin}->{dest} cannot be routed on the open network"
                )
            node = dest
            while node != origin:
                aid = tree.pred_arc[node]
                flows[aid] += demand
                node = int(tails[aid])
    return flows


def all_or_nothing(
    network: Network, weights: np.ndarray, od: ODMatrix, lanes: LaneConfig | None = None
) -> FlowVector:
    """Assign every demand wholly to its shortest path under the given weights."""
    lanes = network.nominal_lanes() if lanes is None else lanes
    weights = np.asarray(weights, dtype=np.float64)
    if (weights < 0).any():
        raise ValueError("arc weights must be nonnegative")
    return FlowVector(_assign(network, _open_adjacency(network, lanes), weights, od))


def relative_gap(
    network: Network, lanes: LaneConfig, flows: FlowVector, od: ODMatrix, mode: str = "so"
) -> float:
    """Convergence measure: how much the linearized objective can still drop.

    Computes ``(w'x - w'y) / w'x`` with ``w`` the mode's link weights at
    the current flows and ``y`` the all-or-nothing assignment under ``w``.
    Nonnegative up to rounding; zero demand gives zero.
    """
    weights = _mode_weights(network, lanes, flows, mode)
    adjacency = _open_adjacency(network, lanes)
    y = _assign(network, adjacency, weights, od)
    open_w = np.where(np.isfinite(weights), weights, 0.0)
    wx = float(open_w @ flows.values)
    wy = float(open_w @ y)
    if wx <= 0:
        return 0.0
    return (wx - wy) / wx


def _line_search(directional, tol: float) -> float:
    if directional(0.0) >= 0:
        return 0.0
    if directional(1.0) <= 0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if directional(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def solve_tap(
    network: Network, lanes: LaneConfig, od: ODMatrix, settings: TapSettings = TapSettings()
) -> TapSolution:
    """Solve the assignment problem at a fixed lane configuration.

    Starts from an all-or-nothing assignment at free-flow times and runs
    Frank-Wolfe until the relative gap reaches the tolerance or the
    iteration cap is hit (reported via ``converged``; never an exception).
    Flows stay feasible by construction: every iterate is a convex
    combination of all-or-nothing assignments.
    """
    mode = settings.mode
    adjacency = _open_adjacency(network, lanes)
    x = _assign(network, adjacency, np.array(network.free_flow_time), od)

    best_bound = -math.inf
    trace: list[TapIterate] = []
    gap = math.inf
    converged = False
    iterations = 0
    step = 0.0
    for k in range(settings.max_iterations):
        iterations = k + 1
        weights = _mode_weights(network, lanes, x, mode)
        y = _assign(network, adjacency, weights, od)
        open_w = np.where(np.isfinite(weights), weights, 0.0)
        wx = float(open_w @ x)
        wy = float(open_w @ y)
        objective = objective_value(network, lanes, x, mode)
        gap = 0.0 if wx <= 0 else (wx - wy) / wx
        best_bound = max(best_bound, objective + (wy - wx))
        trace.append(TapIterate(iterations, objective, gap, best_bound, objective - best_bound, step))
        if gap <= settings.rel_gap_tol:
            converged = True
            break
        if iterations == settings.max_iterations:
            break  # keep flows at the last evaluated point so the gap matches
        direction = y - x

        def directional(lam: float) -> float:
            w = _mode_weights(network, lanes, x + lam * direction, mode)
            w = np.where(np.isfinite(w), w, 0.0)
            return float(w @ direction)

        step = _line_search(directional, settings.line_search_tol)
        if step <= 0.0:
            break
        x = x + step * direction

    flows = FlowVector(x)
    return TapSolution(
        flows=flows,
        objective=objective_value(network, lanes, x, mode),
        total_cost=objective_value(network, lanes, x, "so"),
        relative_gap=gap,
        iterations=iterations,
        converged=converged,
        mode=mode,
        trace=tuple(trace),
    )
