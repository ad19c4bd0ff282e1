"""Contraflow lane-reversal planning toolkit.

Computes optimal lane configurations for a road network under fixed or
re-equilibrated traffic flows: BPR-style arc costs, a Frank-Wolfe traffic
assignment solver, an exact fixed-flow lane-assignment solver built on
piecewise-linear lane costs, a certified relaxed lower bound with integer
projection, a budget-constrained variant, and the experiment pipelines
(demand sweeps, budget sweeps, per-arc improvement tables, single-reversal
audits) behind the `contraflow` command line tool.
"""

__version__ = "0.1.0"

from .model import (
    Arc,
    ArcPair,
    FlowVector,
    LaneConfig,
    LaneInfeasibleError,
    Network,
    ODMatrix,
    PairState,
    PiecewiseCost,
    arc_cost,
    bpr_time,
    build_piecewise,
    make_network,
    pair_gradient,
    reversal_delta_estimate,
    total_cost,
)

__all__ = [
    "__version__",
    "Arc",
    "ArcPair",
    "FlowVector",
    "LaneConfig",
    "LaneInfeasibleError",
    "Network",
    "ODMatrix",
    "PairState",
    "PiecewiseCost",
    "arc_cost",
    "bpr_time",
    "build_piecewise",
    "make_network",
    "pair_gradient",
    "reversal_delta_estimate",
    "total_cost",
]
