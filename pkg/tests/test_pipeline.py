"""Experiment pipelines: sweeps, sequential optimization, audits, improvements."""

from __future__ import annotations

import numpy as np
import pytest

from contraflow.model import ODMatrix, make_network
from contraflow.netio import RunConfig
from contraflow.pipeline import (
    arc_improvements,
    audit_single_reversals,
    budget_sweep,
    demand_sweep,
    sequential_lane_optimization,
)
from contraflow.tap import TapSettings, solve_tap

CFG = RunConfig(fw_rel_gap=1e-9, fw_max_iters=300)


def one_pair_net(z_fwd=2, z_bwd=2, capacity=1000.0, t0=0.05):
    return make_network([(1, 2, capacity, t0, z_fwd), (2, 1, capacity, t0, z_bwd)])


def chain_net():
    specs = [
        (1, 2, 1000.0, 0.05, 2), (2, 1, 1000.0, 0.05, 2),
        (2, 3, 1000.0, 0.06, 3), (3, 2, 1000.0, 0.06, 2),
    ]
    return make_network(specs)


class TestSequential:
    def test_improves_asymmetric_demand(self):
        net = one_pair_net()
        od = ODMatrix(((1, 2, 3000.0), (2, 1, 500.0)))
        nominal_cost = solve_tap(net, net.nominal_lanes(), od, TapSettings(rel_gap_tol=1e-9)).total_cost
        result = sequential_lane_optimization(net, od, CFG)
        assert result.objective < nominal_cost
        assert result.lanes[0] > result.lanes[1]

    def test_already_optimal_terminates_in_one_outer_iteration(self):
        net = one_pair_net()
        od = ODMatrix(((1, 2, 1000.0), (2, 1, 1000.0)))  # symmetric: nominal is optimal
        result = sequential_lane_optimization(net, od, CFG)
        assert result.stop_reason == "fixed_point"
        assert len(result.trace) == 1
        assert result.lanes == net.nominal_lanes()

    def test_accepted_trace_nonincreasing(self):
        net = chain_net()
        od = ODMatrix(((1, 3, 2600.0), (3, 1, 700.0), (1, 2, 400.0)))
        result = sequential_lane_optimization(net, od, CFG)
        accepted = [t.objective for t in result.trace if t.accepted]
        for a, b in zip(accepted, accepted[1:]):
            assert b <= a
        assert result.objective == min(accepted)


class TestDemandSweep:
    def test_rows_and_bound_ordering(self):
        net = chain_net()
        od = ODMatrix(((1, 3, 2000.0), (3, 1, 600.0)))
        table = demand_sweep(net, od, [0.1, 1.0, 1.6], CFG)
        assert [r.param for r in table.rows] == [0.1, 1.0, 1.6]
        for row in table.rows:
            slack = 1e-9 * max(1.0, abs(row.objective_assigned))
            assert row.bound_relaxed <= row.objective_assigned + slack
            assert row.objective_assigned <= row.objective_nominal + slack
            assert row.objective_assigned <= row.objective_projected + slack
            assert row.deviation_nominal_pct >= -1e-9
            assert row.tap_converged

    def test_low_congestion_marginal_benefit(self):
        net = chain_net()
        od = ODMatrix(((1, 3, 2000.0), (3, 1, 600.0)))
        table = demand_sweep(net, od, [0.05, 1.6], CFG)
        assert table.rows[0].deviation_nominal_pct < 0.1  # percent
        assert table.rows[1].deviation_nominal_pct > table.rows[0].deviation_nominal_pct

    def test_rejects_nonpositive_multiplier(self):
        net = chain_net()
        with pytest.raises(ValueError):
            demand_sweep(net, ODMatrix(((1, 3, 10.0),)), [0.0, 1.0], CFG)

    def test_threads_match_serial(self):
        net = chain_net()
        od = ODMatrix(((1, 3, 1500.0), (3, 1, 500.0)))
        serial = demand_sweep(net, od, [0.5, 1.0], CFG, threads=1)
        threaded = demand_sweep(net, od, [0.5, 1.0], CFG, threads=4)
        assert serial == threaded


class TestBudgetSweep:
    def test_zero_budget_is_nominal(self):
        net = chain_net()
        od = ODMatrix(((1, 3, 2600.0), (3, 1, 700.0)))
        table = budget_sweep(net, od, [0], 1.0, CFG)
        row = table.rows[0]
        assert row.objective_budgeted == row.objective_nominal
        assert row.reversals == 0

    def test_fixed_flow_column_nonincreasing_and_stabilizes(self):
        net = chain_net()
        od = ODMatrix(((1, 3, 2600.0), (3, 1, 700.0)))
        budgets = list(range(0, 6))
        table = budget_sweep(net, od, budgets, 1.0, CFG)
        objs = [r.objective_budgeted for r in table.rows]
        for a, b in zip(objs, objs[1:]):
            assert b <= a
        assert objs[-1] == table.rows[-1].objective_assigned

    def test_rejects_unordered_budgets(self):
        net = chain_net()
        with pytest.raises(ValueError):
            budget_sweep(net, ODMatrix(((1, 3, 10.0),)), [2, 1], 1.0, CFG)


class TestArcImprovements:
    def test_unchanged_arc_zero_gain_loss_signs(self):
        net = one_pair_net()
        od = ODMatrix(((1, 2, 3000.0), (2, 1, 500.0)))
        flows = solve_tap(net, net.nominal_lanes(), od, TapSettings(rel_gap_tol=1e-9)).flows
        shifted = net.nominal_lanes().with_pair_split(net, 0, 3)
        table = arc_improvements(net, flows, net.nominal_lanes(), shifted)
        by_arc = {(r.init, r.term): r for r in table.rows}
        assert by_arc[(1, 2)].improvement_pct > 0
        assert by_arc[(2, 1)].improvement_pct < 0
        assert by_arc[(1, 2)].partner_term == 1

        same = arc_improvements(net, flows, net.nominal_lanes(), net.nominal_lanes())
        assert all(r.improvement_pct == 0 for r in same.rows)

    def test_only_flow_carrying_arcs_reported(self):
        net = one_pair_net()
        od = ODMatrix(((1, 2, 1000.0),))  # nothing returns
        flows = solve_tap(net, net.nominal_lanes(), od, TapSettings(rel_gap_tol=1e-9)).flows
        table = arc_improvements(net, flows, net.nominal_lanes(), net.nominal_lanes())
        assert [(r.init, r.term) for r in table.rows] == [(1, 2)]


class TestReversalAudit:
    def test_no_violations_at_sequential_fixed_point(self):
        net = chain_net()
        od = ODMatrix(((1, 3, 2600.0), (3, 1, 700.0), (1, 2, 400.0)))
        seq = sequential_lane_optimization(net, od, CFG)
        assert seq.stop_reason == "fixed_point"
        audit = audit_single_reversals(net, od, seq.lanes, CFG)
        assert audit.violations == ()
        feasible = [r for r in audit.rows if r.feasible]
        assert feasible and all(r.exact_delta > 0 for r in feasible)

    def test_nominal_config_shows_missed_improvements(self):
        net = chain_net()
        od = ODMatrix(((1, 3, 2600.0), (3, 1, 700.0), (1, 2, 400.0)))
        audit = audit_single_reversals(net, od, net.nominal_lanes(), CFG)
        assert len(audit.violations) >= 1

    def test_estimate_sign_agrees_on_lightly_loaded_pairs(self):
        # low flows barely move after one reversal, so the fixed-flow
        # estimate must predict the sign of the exact change
        net = chain_net()
        od = ODMatrix(((1, 3, 900.0), (3, 1, 150.0)))
        audit = audit_single_reversals(net, od, net.nominal_lanes(), CFG)
        for row in audit.rows:
            if row.feasible and abs(row.exact_delta) > audit.tolerance:
                assert np.sign(row.exact_delta) == np.sign(row.estimate_delta)

    def test_infeasible_moves_marked(self):
        net = one_pair_net(z_fwd=1, z_bwd=1)
        od = ODMatrix(((1, 2, 500.0),))
        audit = audit_single_reversals(net, od, net.nominal_lanes(), CFG)
        assert all(not r.feasible for r in audit.rows)
        assert audit.violations == ()

    def test_neighbor_solve_failure_recorded_and_audit_continues(self):
        # with no lane floor, reversing the only backward lane strands the
        # reverse demand; the audit records the failure and keeps going
        net = make_network([(1, 2, 1000.0, 0.05, 1), (2, 1, 1000.0, 0.05, 1)], min_lanes=0)
        od = ODMatrix(((1, 2, 800.0), (2, 1, 300.0)))
        audit = audit_single_reversals(net, od, net.nominal_lanes(), CFG)
        assert len(audit.rows) == 2
        assert all(r.feasible for r in audit.rows)
        assert all(r.error is not None and r.exact_delta is None for r in audit.rows)
        assert audit.violations == ()

    def test_seeded_sampling_is_deterministic(self):
        specs = []
        for p in range(6):
            u, v = 10 * p + 1, 10 * p + 2
            specs += [(u, v, 1000.0, 0.05, 2), (v, u, 1000.0, 0.05, 2)]
        net = make_network(specs)
        od = ODMatrix(tuple((10 * p + 1, 10 * p + 2, 800.0) for p in range(6)))
        a = audit_single_reversals(net, od, net.nominal_lanes(), CFG, sample=3)
        b = audit_single_reversals(net, od, net.nominal_lanes(), CFG, sample=3)
        assert a.sampled_pairs == b.sampled_pairs
        assert len(a.sampled_pairs) == 3
        c = audit_single_reversals(net, od, net.nominal_lanes(), RunConfig(fw_rel_gap=1e-9, seed=9), sample=3)
        assert isinstance(c.sampled_pairs, tuple)

    def test_threads_match_serial(self):
        net = chain_net()
        od = ODMatrix(((1, 3, 2600.0), (3, 1, 700.0)))
        serial = audit_single_reversals(net, od, net.nominal_lanes(), CFG, threads=1)
        threaded = audit_single_reversals(net, od, net.nominal_lanes(), CFG, threads=4)
        assert serial == threaded
