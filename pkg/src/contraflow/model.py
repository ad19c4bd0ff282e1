"""Road-network domain model and lane-dependent travel-cost math.

Travel time on an arc follows the BPR (Bureau of Public Roads) form
``t0 * (1 + alpha * (x / (c * z)) ** power)`` where ``x`` is the arc flow,
``c`` the capacity per lane and ``z`` the number of open lanes.  Multiplying
by the flow gives the arc cost ``t0*x + gamma * x**(power+1) / z**power``
with ``gamma = alpha * t0 / c**power``, which for fixed positive flow is
strictly decreasing and convex in ``z``.

Besides the immutable domain types (networks, arc pairs, lane
configurations, flow vectors, demand matrices) this module provides the
closed-form pieces the solvers are built from: arc costs, the derivative of
a pair's cost with respect to moving capacity between its two directions,
the fixed-flow estimate of a single lane reversal, and the piecewise-linear
cost tables over integer lane counts.

Everything here is pure and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

BPR_ALPHA = 0.15
BPR_POWER = 4.0


class LaneInfeasibleError(ValueError):
    """No lane split can satisfy an arc pair's per-direction lane floors."""


def bpr_time(
    flow: float,
    lanes: float,
    capacity: float,
    free_flow_time: float,
    alpha: float = BPR_ALPHA,
    power: float = BPR_POWER,
) -> float:
    """Travel time on an arc with ``lanes`` open lanes carrying ``flow``.

    Zero flow always costs the free-flow time, even with zero lanes open.
    Positive flow over zero lanes returns ``inf`` so that optimization
    logic uniformly rejects configurations that strand traffic.
    """
    if flow < 0 or lanes < 0:
        raise ValueError(f"flow and lanes must be nonnegative (got {flow!r}, {lanes!r})")
    if capacity <= 0 or free_flow_time <= 0:
        raise ValueError(
            f"capacity and free-flow time must be positive (got {capacity!r}, {free_flow_time!r})"
        )
    if flow == 0:
        return free_flow_time
    if lanes == 0:
        return math.inf
    ratio = flow / (capacity * lanes)
    return free_flow_time * (1.0 + alpha * ratio**power)


def arc_cost(
    flow: float,
    lanes: float,
    capacity: float,
    free_flow_time: float,
    alpha: float = BPR_ALPHA,
    power: float = BPR_POWER,
) -> float:
    """Flow-weighted travel time; zero when the flow is zero."""
    return flow * bpr_time(flow, lanes, capacity, free_flow_time, alpha, power)


def congestion_coefficient(
    capacity: float,
    free_flow_time: float,
    alpha: float = BPR_ALPHA,
    power: float = BPR_POWER,
) -> float:
    """Coefficient of ``x**(power+1) / z**power`` in the arc cost."""
    return alpha * free_flow_time / capacity**power


@dataclass(frozen=True)
class Arc:
    """One directed road segment with per-lane capacity.

    ``capacity`` is per lane (veh/h/lane); the total capacity of the arc is
    ``lanes * capacity`` and is never stored.
    """

    id: int
    tail: int
    head: int
    capacity: float
    free_flow_time: float
    lanes_nominal: int
    reversible: bool = False
    alpha: float = BPR_ALPHA
    power: float = BPR_POWER

    def __post_init__(self) -> None:
        if self.tail == self.head:
            raise ValueError(f"arc {self.tail}->{self.head}: self loops are not allowed")
        if (
            not math.isfinite(self.capacity)
            or not math.isfinite(self.free_flow_time)
            or self.capacity <= 0
            or self.free_flow_time <= 0
        ):
            raise ValueError(
                f"arc {self.tail}->{self.head}: capacity and free-flow time must be finite and positive"
            )
        if self.lanes_nominal < 0 or self.lanes_nominal != int(self.lanes_nominal):
            raise ValueError(f"arc {self.tail}->{self.head}: nominal lanes must be an integer >= 0")

    @property
    def gamma(self) -> float:
        return congestion_coefficient(self.capacity, self.free_flow_time, self.alpha, self.power)

    def time(self, flow: float, lanes: float) -> float:
        return bpr_time(flow, lanes, self.capacity, self.free_flow_time, self.alpha, self.power)

    def cost(self, flow: float, lanes: float) -> float:
        return arc_cost(flow, lanes, self.capacity, self.free_flow_time, self.alpha, self.power)


@dataclass(frozen=True)
class ArcPair:
    """Two opposite-direction arcs sharing one physical road.

    ``total_lanes`` is the combined lane budget of the road; a lane split
    assigns it between the two directions subject to ``min_lanes`` each.
    """

    forward: int
    backward: int
    total_lanes: int
    min_lanes: int = 1

    def __post_init__(self) -> None:
        if self.forward == self.backward:
            raise ValueError("a pair must reference two distinct arcs")
        if self.total_lanes < 1:
            raise ValueError("a pair must own at least one lane")
        if self.min_lanes < 0:
            raise ValueError("min_lanes must be >= 0")


@dataclass(frozen=True, eq=False)
class LaneConfig:
    """Integer open-lane counts per arc, indexed by arc id."""

    lanes: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.lanes, dtype=np.int64, copy=True)
        if arr.ndim != 1:
            raise ValueError("lane configuration must be one-dimensional")
        if (arr < 0).any():
            raise ValueError("lane counts must be >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "lanes", arr)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LaneConfig) and np.array_equal(self.lanes, other.lanes)

    def __hash__(self) -> int:
        return hash(self.lanes.tobytes())

    def __getitem__(self, arc_id: int) -> int:
        return int(self.lanes[arc_id])

    def __len__(self) -> int:
        return self.lanes.shape[0]

    def total(self) -> int:
        return int(self.lanes.sum())

    def with_pair_split(self, network: "Network", pair_index: int, forward_lanes: int) -> "LaneConfig":
        """New configuration with one pair's split replaced (total preserved)."""
        pair = network.pairs[pair_index]
        if not 0 <= forward_lanes <= pair.total_lanes:
            raise ValueError(
                f"forward lanes {forward_lanes} outside 0..{pair.total_lanes} for pair {pair_index}"
            )
        arr = np.array(self.lanes, copy=True)
        arr[pair.forward] = forward_lanes
        arr[pair.backward] = pair.total_lanes - forward_lanes
        return LaneConfig(arr)


@dataclass(frozen=True, eq=False)
class FlowVector:
    """Nonnegative arc flows (veh/h), indexed by arc id."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 1:
            raise ValueError("flow vector must be one-dimensional")
        if (arr < 0).any() or not np.isfinite(arr).all():
            raise ValueError("flows must be finite and >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FlowVector) and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def __getitem__(self, arc_id: int) -> float:
        return float(self.values[arc_id])

    def __len__(self) -> int:
        return self.values.shape[0]

    @classmethod
    def zeros(cls, num_arcs: int) -> "FlowVector":
        return cls(np.zeros(num_arcs))

    def total(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class ODMatrix:
    """Origin-destination demand rates, scalable by a common multiplier."""

    entries: tuple[tuple[int, int, float], ...]
    multiplier: float = 1.0

    def __post_init__(self) -> None:
        norm = []
        for origin, dest, demand in self.entries:
            if not math.isfinite(demand) or demand < 0:
                raise ValueError(f"demand {origin}->{dest} must be finite and >= 0 (got {demand})")
            if origin == dest and demand > 0:
                raise ValueError(f"positive demand on self pair {origin}->{origin}")
            norm.append((int(origin), int(dest), float(demand)))
        if self.multiplier <= 0:
            raise ValueError(f"demand multiplier must be positive (got {self.multiplier})")
        object.__setattr__(self, "entries", tuple(norm))

    def __len__(self) -> int:
        return len(self.entries)

    def with_multiplier(self, multiplier: float) -> "ODMatrix":
        return ODMatrix(self.entries, multiplier)

    def scaled(self) -> tuple[tuple[int, int, float], ...]:
        """Entries with the multiplier applied."""
        return tuple((o, d, v * self.multiplier) for o, d, v in self.entries)

    def by_origin(self) -> dict[int, tuple[tuple[int, float], ...]]:
        """Scaled positive demands grouped by origin, everything sorted."""
        grouped: dict[int, list[tuple[int, float]]] = {}
        for origin, dest, demand in self.entries:
            if demand <= 0:
                continue
            grouped.setdefault(origin, []).append((dest, demand * self.multiplier))
        return {o: tuple(sorted(ds)) for o, ds in sorted(grouped.items())}

    @property
    def total_demand(self) -> float:
        return self.multiplier * sum(v for _, _, v in self.entries)

    def validate_against(self, network: "Network") -> None:
        known = set(network.nodes)
        for origin, dest, _ in self.entries:
            if origin not in known or dest not in known:
                raise ValueError(f"demand pair {origin}->{dest} references an unknown node")


@dataclass(frozen=True, eq=False)
class Network:
    """Directed road network with reversible-pair structure.

    Arcs are indexed by position (``arcs[i].id == i``).  Adjacency tables
    and per-arc parameter vectors are materialized once at construction;
    instances are immutable and safe to share between threads.
    """

    nodes: tuple[int, ...]
    arcs: tuple[Arc, ...]
    pairs: tuple[ArcPair, ...]
    capacity: np.ndarray = field(init=False, repr=False)
    free_flow_time: np.ndarray = field(init=False, repr=False)
    lanes_nominal: np.ndarray = field(init=False, repr=False)
    alpha: np.ndarray = field(init=False, repr=False)
    power: np.ndarray = field(init=False, repr=False)
    gamma: np.ndarray = field(init=False, repr=False)
    tails: np.ndarray = field(init=False, repr=False)
    heads: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        nodes = tuple(sorted(set(int(n) for n in self.nodes)))
        if not nodes:
            raise ValueError("network needs at least one node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "pairs", tuple(self.pairs))

        node_set = set(nodes)
        seen_endpoints: dict[tuple[int, int], int] = {}
        for i, arc in enumerate(self.arcs):
            if arc.id != i:
                raise ValueError(f"arc ids must be contiguous positions (arc {arc.id} at index {i})")
            if arc.tail not in node_set or arc.head not in node_set:
                raise ValueError(f"arc {arc.tail}->{arc.head} references an unknown node")
            if (arc.tail, arc.head) in seen_endpoints:
                raise ValueError(f"duplicate arc {arc.tail}->{arc.head}")
            seen_endpoints[(arc.tail, arc.head)] = i

        pair_of: dict[int, int] = {}
        for k, pair in enumerate(self.pairs):
            fwd, bwd = self.arcs[pair.forward], self.arcs[pair.backward]
            if (fwd.tail, fwd.head) != (bwd.head, bwd.tail):
                raise ValueError(f"pair {k} arcs are not opposite directions of one road")
            for aid in (pair.forward, pair.backward):
                if aid in pair_of:
                    raise ValueError(f"arc {aid} belongs to more than one pair")
                pair_of[aid] = k
            if pair.total_lanes != fwd.lanes_nominal + bwd.lanes_nominal:
                raise ValueError(
                    f"pair {fwd.tail}<->{fwd.head}: total lanes {pair.total_lanes} does not equal "
                    f"the nominal sum {fwd.lanes_nominal + bwd.lanes_nominal}"
                )
            if fwd.lanes_nominal > 0 and bwd.lanes_nominal > 0 and pair.total_lanes < 2 * pair.min_lanes:
                raise ValueError(
                    f"pair {fwd.tail}<->{fwd.head}: {pair.total_lanes} lanes cannot give "
                    f"both directions the minimum of {pair.min_lanes}"
                )
        for arc in self.arcs:
            if arc.reversible != (arc.id in pair_of):
                raise ValueError(f"arc {arc.tail}->{arc.head}: reversible flag inconsistent with pairs")

        out: dict[int, list[tuple[int, int]]] = {n: [] for n in nodes}
        for arc in self.arcs:
            out[arc.tail].append((arc.head, arc.id))
        object.__setattr__(self, "_out", {n: tuple(sorted(v)) for n, v in out.items()})
        object.__setattr__(self, "_by_endpoints", seen_endpoints)
        object.__setattr__(self, "_pair_of", pair_of)

        def vec(get, dtype=np.float64):
            arr = np.array([get(a) for a in self.arcs], dtype=dtype)
            arr.setflags(write=False)
            return arr

        object.__setattr__(self, "capacity", vec(lambda a: a.capacity))
        object.__setattr__(self, "free_flow_time", vec(lambda a: a.free_flow_time))
        object.__setattr__(self, "lanes_nominal", vec(lambda a: a.lanes_nominal, np.int64))
        object.__setattr__(self, "alpha", vec(lambda a: a.alpha))
        object.__setattr__(self, "power", vec(lambda a: a.power))
        object.__setattr__(self, "gamma", vec(lambda a: a.gamma))
        object.__setattr__(self, "tails", vec(lambda a: a.tail, np.int64))
        object.__setattr__(self, "heads", vec(lambda a: a.head, np.int64))

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_arcs(self) -> int:
        return len(self.arcs)

    def out_arcs(self, node: int) -> tuple[tuple[int, int], ...]:
        """Outgoing ``(head, arc_id)`` tuples of a node, sorted."""
        return self._out[node]

    def arc_between(self, tail: int, head: int) -> Arc | None:
        idx = self._by_endpoints.get((tail, head))
        return None if idx is None else self.arcs[idx]

    def pair_index_of(self, arc_id: int) -> int | None:
        return self._pair_of.get(arc_id)

    def nominal_lanes(self) -> LaneConfig:
        return LaneConfig(self.lanes_nominal)

    def is_strongly_connected(self, lanes: LaneConfig | None = None) -> bool:
        """Mutual reachability over arcs with at least one open lane."""
        z = self.lanes_nominal if lanes is None else lanes.lanes
        fwd: dict[int, list[int]] = {n: [] for n in self.nodes}
        rev: dict[int, list[int]] = {n: [] for n in self.nodes}
        for arc in self.arcs:
            if z[arc.id] >= 1:
                fwd[arc.tail].append(arc.head)
                rev[arc.head].append(arc.tail)

        def reaches_all(adj: dict[int, list[int]]) -> bool:
            seen = {self.nodes[0]}
            stack = [self.nodes[0]]
            while stack:
                for nxt in adj[stack.pop()]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            return len(seen) == self.num_nodes

        return reaches_all(fwd) and reaches_all(rev)


def make_network(
    arc_specs: Iterable[tuple[int, int, float, float, int]],
    *,
    min_lanes: int = 1,
    alpha: float = BPR_ALPHA,
    power: float = BPR_POWER,
) -> Network:
    """Assemble a network from ``(tail, head, capacity_per_lane, free_flow_time, lanes)`` rows.

    Opposite-direction rows are paired automatically and marked reversible;
    a pair's lane budget is the sum of the two nominal counts.  Rows are
    sorted by endpoints so arc ids do not depend on input order.
    """
    specs = sorted(arc_specs, key=lambda s: (s[0], s[1]))
    index = {(t, h): i for i, (t, h, *_rest) in enumerate(specs)}
    if len(index) != len(specs):
        raise ValueError("duplicate arc endpoints in specification")

    arcs = []
    for i, (tail, head, cap, t0, z0) in enumerate(specs):
        arcs.append(
            Arc(
                id=i,
                tail=tail,
                head=head,
                capacity=cap,
                free_flow_time=t0,
                lanes_nominal=int(z0),
                reversible=(head, tail) in index,
                alpha=alpha,
                power=power,
            )
        )

    pairs = []
    for arc in arcs:
        back = index.get((arc.head, arc.tail))
        if back is not None and (arc.tail, arc.head) < (arc.head, arc.tail):
            pairs.append(
                ArcPair(
                    forward=arc.id,
                    backward=back,
                    total_lanes=arc.lanes_nominal + arcs[back].lanes_nominal,
                    min_lanes=min_lanes,
                )
            )

    nodes = sorted({s[0] for s in specs} | {s[1] for s in specs})
    return Network(tuple(nodes), tuple(arcs), tuple(pairs))


@dataclass(frozen=True)
class PairState:
    """Snapshot of one reversible pair: arc parameters, flows and lane split."""

    forward: Arc
    backward: Arc
    flow_forward: float
    flow_backward: float
    lanes_forward: float
    lanes_backward: float
    total_lanes: int
    min_lanes: int = 1

    @classmethod
    def from_network(
        cls,
        network: Network,
        pair_index: int,
        lanes: LaneConfig | np.ndarray,
        flows: FlowVector,
    ) -> "PairState":
        pair = network.pairs[pair_index]
        z = lanes.lanes if isinstance(lanes, LaneConfig) else np.asarray(lanes)
        return cls(
            forward=network.arcs[pair.forward],
            backward=network.arcs[pair.backward],
            flow_forward=flows[pair.forward],
            flow_backward=flows[pair.backward],
            lanes_forward=float(z[pair.forward]),
            lanes_backward=float(z[pair.backward]),
            total_lanes=pair.total_lanes,
            min_lanes=pair.min_lanes,
        )

    def reversed(self) -> "PairState":
        """The same road seen from the opposite direction."""
        return PairState(
            forward=self.backward,
            backward=self.forward,
            flow_forward=self.flow_backward,
            flow_backward=self.flow_forward,
            lanes_forward=self.lanes_backward,
            lanes_backward=self.lanes_forward,
            total_lanes=self.total_lanes,
            min_lanes=self.min_lanes,
        )

    def cost(self) -> float:
        """Combined cost of both directions at the current split."""
        return self.forward.cost(self.flow_forward, self.lanes_forward) + self.backward.cost(
            self.flow_backward, self.lanes_backward
        )


def pair_gradient(state: PairState) -> float:
    """Derivative of the pair's cost as capacity shifts into the forward direction.

    Capacity added to the forward arc is removed from the backward arc, so
    the derivative is ``-p_f*gamma_f*x_f**(p_f+1)/z_f**(p_f+1)
    + p_b*gamma_b*x_b**(p_b+1)/z_b**(p_b+1)``.  Defined only at interior
    splits; the zero-lane boundary needs a one-sided treatment and raises.
    """
    if state.lanes_forward <= 0 or state.lanes_backward <= 0:
        raise ValueError("pair gradient undefined at the zero-lane boundary")
    grad = 0.0
    fwd, bwd = state.forward, state.backward
    if state.flow_forward > 0:
        grad -= (
            fwd.power
            * fwd.gamma
            * state.flow_forward ** (fwd.power + 1.0)
            / state.lanes_forward ** (fwd.power + 1.0)
        )
    if state.flow_backward > 0:
        grad += (
            bwd.power
            * bwd.gamma
            * state.flow_backward ** (bwd.power + 1.0)
            / state.lanes_backward ** (bwd.power + 1.0)
        )
    return grad


def reversal_delta_estimate(state: PairState, direction: str = "forward") -> float:
    """Fixed-flow cost change from reversing one lane into ``direction``.

    Evaluates the pair cost before and after moving one lane while holding
    both flows fixed.  Returns ``inf`` when the move would leave the losing
    direction below its lane floor, or would strand positive flow on a
    zero-lane arc.
    """
    if direction == "backward":
        state = state.reversed()
    elif direction != "forward":
        raise ValueError(f"direction must be 'forward' or 'backward' (got {direction!r})")

    base = state.cost()
    if not math.isfinite(base):
        raise ValueError("pair state has non-finite cost; reversal delta undefined")
    if state.lanes_backward - 1 < state.min_lanes:
        return math.inf
    moved = state.forward.cost(state.flow_forward, state.lanes_forward + 1) + state.backward.cost(
        state.flow_backward, state.lanes_backward - 1
    )
    return moved - base


def split_bounds(state: PairState) -> tuple[int, int]:
    """Feasible forward lane counts ``[lo, hi]`` for a pair.

    Each direction needs ``min_lanes``, and any direction carrying flow
    needs at least one lane regardless of the floor.  On roads too narrow
    to give every direction its floor, the floor is waived for directions
    with no flow; if that still does not fit, the pair is infeasible.
    """
    n = state.total_lanes
    lo_f = state.min_lanes if state.flow_forward == 0 else max(state.min_lanes, 1)
    lo_b = state.min_lanes if state.flow_backward == 0 else max(state.min_lanes, 1)
    if lo_f + lo_b > n:
        if state.flow_forward == 0:
            lo_f = 0
        if state.flow_backward == 0:
            lo_b = 0
    if lo_f + lo_b > n:
        raise LaneInfeasibleError(
            f"road {state.forward.tail}<->{state.forward.head}: {n} lanes cannot serve "
            f"flow in both directions with a per-direction floor of {max(state.min_lanes, 1)}"
        )
    return lo_f, n - lo_b


@dataclass(frozen=True)
class PiecewiseCost:
    """Arc cost sampled at integer lane counts, stored as base plus slopes.

    ``slopes[k]`` is the cost change from opening lane ``base_lanes + k + 1``.
    Slopes are nondecreasing (the cost is convex in the lane count), all
    nonpositive for positive flow, and exactly zero for zero flow.
    """

    arc: int
    base_lanes: int
    base_cost: float
    slopes: tuple[float, ...]
    _cumulative: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for a, b in zip(self.slopes, self.slopes[1:]):
            if a > b:
                raise ValueError("slopes must be nondecreasing; the lane cost is convex")
        running = [0.0]
        for s in self.slopes:
            running.append(running[-1] + s)
        object.__setattr__(self, "_cumulative", tuple(running))

    @property
    def max_lanes(self) -> int:
        return self.base_lanes + len(self.slopes)

    def cost_at(self, lanes: int) -> float:
        k = lanes - self.base_lanes
        if not 0 <= k <= len(self.slopes):
            raise ValueError(
                f"lane count {lanes} outside table range {self.base_lanes}..{self.max_lanes}"
            )
        return self.base_cost + self._cumulative[k]


def _piecewise_for_arc(arc: Arc, flow: float, lo: int, hi: int) -> PiecewiseCost:
    base = arc.cost(flow, lo)
    if flow == 0:
        slopes = (0.0,) * (hi - lo)
    else:
        # Consecutive-cost differences; the free-flow term cancels exactly,
        # so convexity of the slopes survives floating point.
        cong = arc.gamma * flow ** (arc.power + 1.0)
        slopes = tuple(
            cong * ((k + 1.0) ** -arc.power - float(k) ** -arc.power) for k in range(lo, hi)
        )
    return PiecewiseCost(arc=arc.id, base_lanes=lo, base_cost=base, slopes=slopes)


def build_piecewise(state: PairState) -> tuple[PiecewiseCost, PiecewiseCost]:
    """Piecewise-linear lane-cost tables for both directions of a pair.

    Each table anchors the true cost at every integer lane count inside the
    pair's feasible split range, so optimizing over the tables is exact on
    integers.
    """
    lo_f, hi_f = split_bounds(state)
    lo_b, hi_b = state.total_lanes - hi_f, state.total_lanes - lo_f
    fwd = _piecewise_for_arc(state.forward, state.flow_forward, lo_f, hi_f)
    bwd = _piecewise_for_arc(state.backward, state.flow_backward, lo_b, hi_b)
    return fwd, bwd


def _as_arrays(network: Network, lanes, flows) -> tuple[np.ndarray, np.ndarray]:
    z = lanes.lanes if isinstance(lanes, LaneConfig) else np.asarray(lanes, dtype=np.float64)
    x = flows.values if isinstance(flows, FlowVector) else np.asarray(flows, dtype=np.float64)
    if z.shape != (network.num_arcs,) or x.shape != (network.num_arcs,):
        raise ValueError("lane or flow vector length does not match the network")
    if (np.asarray(z) < 0).any():
        raise ValueError("lane counts must be >= 0")
    if (x < 0).any():
        raise ValueError("flows must be >= 0")
    return np.asarray(z, dtype=np.float64), x


def arc_costs(network: Network, lanes, flows) -> np.ndarray:
    """Per-arc cost vector; ``inf`` where positive flow meets zero lanes."""
    z, x = _as_arrays(network, lanes, flows)
    safe_z = np.where(z > 0, z, 1.0)
    ratio = np.where(x > 0, x / (network.capacity * safe_z), 0.0)
    times = network.free_flow_time * (1.0 + network.alpha * ratio**network.power)
    out = x * times
    return np.where((x > 0) & (z <= 0), np.inf, out)


def total_cost(network: Network, lanes, flows) -> float:
    """Network-wide cost: the sum of all arc costs at the given lanes and flows."""
    return float(arc_costs(network, lanes, flows).sum())
