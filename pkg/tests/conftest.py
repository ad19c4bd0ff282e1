"""Shared fixtures: toy networks, random instance generators, oracle helpers."""

from __future__ import annotations

import os
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from contraflow.model import FlowVector, ODMatrix, make_network

hypothesis.settings.register_profile("suite", max_examples=60, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=400, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "suite"))


def pair_only_network(pair_specs, min_lanes=1):
    """Isolated two-node roads, one per spec.

    Each spec is ``(t0_f, t0_b, c_f, c_b, z0_f, n, x_f, x_b)``; returns the
    network and the matching flow vector.
    """
    arc_specs = []
    flows = {}
    for p, (t0f, t0b, cf, cb, z0f, n, xf, xb) in enumerate(pair_specs):
        u, v = 10 * p + 1, 10 * p + 2
        arc_specs.append((u, v, cf, t0f, z0f))
        arc_specs.append((v, u, cb, t0b, n - z0f))
        flows[(u, v)] = xf
        flows[(v, u)] = xb
    net = make_network(arc_specs, min_lanes=min_lanes)
    x = np.zeros(net.num_arcs)
    for arc in net.arcs:
        x[arc.id] = flows[(arc.tail, arc.head)]
    return net, FlowVector(x)


def random_pair_instance(rng, max_pairs=6, n_max=6, min_lanes=1):
    """Random lane-assignment instance within the documented parameter ranges."""
    n_pairs = int(rng.integers(1, max_pairs + 1))
    specs = []
    for _ in range(n_pairs):
        n = int(rng.integers(2 * max(min_lanes, 1), n_max + 1))
        z0f = int(rng.integers(min_lanes, n - min_lanes + 1))
        t0f, t0b = rng.uniform(0.5, 2.0, 2)
        cf, cb = rng.uniform(500.0, 2000.0, 2)
        xf = float(rng.uniform(0.0, 3.0 * cf * n))
        xb = float(rng.uniform(0.0, 3.0 * cb * n))
        specs.append((t0f, t0b, cf, cb, z0f, n, xf, xb))
    return pair_only_network(specs, min_lanes=min_lanes)


def braess_network(z0=1, capacity=1000.0):
    """Four-node diamond with the crossover road, every road two-way."""
    roads = [(1, 2, 1.0), (1, 3, 1.0), (2, 4, 1.0), (3, 4, 1.0), (2, 3, 1.0)]
    specs = []
    for u, v, t0 in roads:
        specs.append((u, v, capacity, t0, z0))
        specs.append((v, u, capacity, t0, z0))
    return make_network(specs)


def ring_network(rng, n_nodes=6, chords=1):
    """Strongly connected random network: a two-way ring plus random chords."""
    specs = []
    seen = set()

    def add_road(u, v):
        if (u, v) in seen or u == v:
            return
        seen.add((u, v))
        seen.add((v, u))
        cf, cb = rng.uniform(500.0, 2000.0, 2)
        t0f, t0b = rng.uniform(0.5, 2.0, 2)
        zf, zb = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        specs.append((u, v, cf, t0f, zf))
        specs.append((v, u, cb, t0b, zb))

    for i in range(n_nodes):
        add_road(i + 1, (i + 1) % n_nodes + 1)
    for _ in range(chords):
        u = int(rng.integers(1, n_nodes + 1))
        v = int(rng.integers(1, n_nodes + 1))
        add_road(u, v)
    return make_network(specs)


def random_demand(rng, network, n_pairs=3, scale=1500.0):
    nodes = list(network.nodes)
    entries = {}
    for _ in range(n_pairs):
        o, d = rng.choice(nodes, 2, replace=False)
        entries[(int(o), int(d))] = entries.get((int(o), int(d)), 0.0) + float(
            rng.uniform(0.2, 1.0) * scale
        )
    return ODMatrix(tuple((o, d, v) for (o, d), v in sorted(entries.items())))


def node_balance_residual(network, flows, od):
    """Max absolute node imbalance of the aggregated flow versus the demand."""
    balance = {n: 0.0 for n in network.nodes}
    for arc in network.arcs:
        balance[arc.tail] -= flows[arc.id]
        balance[arc.head] += flows[arc.id]
    for o, d, v in od.scaled():
        balance[o] += v
        balance[d] -= v
    return max(abs(v) for v in balance.values())


def ema_dir() -> Path | None:
    """Directory with the EMA dataset, when present."""
    candidates = [Path(os.environ.get("CONTRAFLOW_EMA_DIR", ""))] if os.environ.get(
        "CONTRAFLOW_EMA_DIR"
    ) else []
    candidates.append(Path(__file__).resolve().parents[1] / "data" / "ema")
    for cand in candidates:
        if cand and (cand / "EMA_net.tntp").exists() and (cand / "EMA_trips.tntp").exists():
            return cand
    return None


requires_ema = pytest.mark.skipif(ema_dir() is None, reason="EMA dataset not present under data/ema")
