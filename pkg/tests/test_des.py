import io
import math
import statistics

import pytest

from conftest import ERLANG_B_10_5
from adaptive_cac.chain import SchemePolicy
from adaptive_cac.des import (
    HANDOVER,
    NEW,
    CallRecord,
    CellState,
    InvariantViolation,
    SimConfig,
    SimStats,
    admission_decision,
    aggregate,
    check_invariants,
    rebalance,
    run_replication,
    simulate,
)
from adaptive_cac.traffic import CellParameters, TrafficClass, TrafficMix

PROPOSED = SchemePolicy.proposed()


def filled(mix, capacity, classes):
    state = CellState(mix, capacity)
    for i, m in enumerate(classes):
        state.add(CallRecord(i, m, NEW, 1.0, 1.0, math.inf, 0.0))
    rebalance(state)
    return state


# -- admission -----------------------------------------------------------------

def test_empty_cell_admits(single_mix):
    state = CellState(single_mix, 1000.0)
    for policy in (PROPOSED, SchemePolicy.hard(), SchemePolicy.hard_guard(0.05)):
        assert admission_decision(state, 0, NEW, policy)


def test_twelve_calls_new_rejected_handover_admitted(single_mix):
    state = filled(single_mix, 1000.0, [0] * 12)
    assert not admission_decision(state, 0, NEW, PROPOSED)  # 13 * 80 = 1040 > 1000
    assert admission_decision(state, 0, HANDOVER, PROPOSED)  # 13 * 50 = 650
    assert admission_decision(state, 0, NEW, SchemePolicy.non_prioritized())


def test_handover_rejected_at_top_state(single_mix):
    state = filled(single_mix, 1000.0, [0] * 20)
    assert state.theta == pytest.approx(1.0)
    assert not admission_decision(state, 0, HANDOVER, PROPOSED)


def test_hard_and_guard_admission(single_mix):
    state = filled(single_mix, 1000.0, [0] * 9)
    assert admission_decision(state, 0, NEW, SchemePolicy.hard())
    assert not admission_decision(state, 0, NEW, SchemePolicy.hard_guard(0.05))  # 1000 > 950
    assert admission_decision(state, 0, HANDOVER, SchemePolicy.hard_guard(0.05))
    state = filled(single_mix, 1000.0, [0] * 10)
    assert not admission_decision(state, 0, HANDOVER, SchemePolicy.hard())


# -- rebalance -----------------------------------------------------------------

def test_rebalance_under_capacity_restores_full_rate(single_mix):
    state = filled(single_mix, 1000.0, [0] * 12)
    assert state.theta > 0
    for cid in range(3):
        state.remove(cid)
    assert rebalance(state) == 0.0
    assert state.allocation(0) == 100.0


def test_rebalance_twelve_calls(single_mix):
    state = filled(single_mix, 1000.0, [0] * 12)
    assert state.theta == pytest.approx(1 / 3)
    assert state.allocation(0) == pytest.approx(83.3333333333, rel=1e-10)
    assert state.total_allocated() == pytest.approx(1000.0, rel=1e-12)
    check_invariants(state)


def test_real_time_call_never_squeezed():
    mix = TrafficMix.from_ratios([TrafficClass("voice", 1, 25.0), TrafficClass("bulk", 1, 100.0, 0.2, 0.9)])
    state = filled(mix, 500.0, [0, 1, 1, 1, 1, 1, 1])
    assert state.theta > 0
    assert state.allocation(0) == 25.0
    assert state.current_gamma(0) == 0.0
    check_invariants(state)


def test_rebalance_detects_over_admission(single_mix):
    state = CellState(single_mix, 1000.0)
    for i in range(21):
        state.add(CallRecord(i, 0, HANDOVER, 1.0, 1.0, math.inf, 0.0))
    with pytest.raises(InvariantViolation):
        rebalance(state)


# -- replications ----------------------------------------------------------------

def test_no_arrivals(single_mix):
    cfg = SimConfig(single_mix, CellParameters(1000.0, 0.0, 0.0), PROPOSED, horizon=1e4)
    st = run_replication(cfg)
    assert (st.offered_new, st.offered_handover, st.blocked_new, st.utilization) == (0, 0, 0, 0.0)


def test_infinite_capacity_never_blocks(ref_mix):
    cfg = SimConfig(ref_mix, CellParameters(1e9, 0.5, 0.25), PROPOSED, horizon=2e4)
    st = run_replication(cfg)
    assert st.offered_new > 1000
    assert st.p_block == st.p_drop == 0.0


def test_erlang_b_loss_system(rt_mix, single_cell):
    cfg = SimConfig(rt_mix, single_cell, SchemePolicy.hard(), horizon=1e5, replications=10, seed=5)
    reps = [run_replication(cfg, r) for r in range(cfg.replications)]
    vals = [r.p_block for r in reps]
    se = statistics.stdev(vals) / math.sqrt(len(vals))
    assert abs(statistics.fmean(vals) - ERLANG_B_10_5) <= 3 * se


def test_elastic_call_alone_lasts_full_rate_duration():
    # single elastic class, capacity for one call, new calls may not degrade:
    # every admitted call runs alone at its full 100 kbit/s
    mix = TrafficMix([TrafficClass("bulk", 1.0, 100.0, 0.0, 0.5)])
    cell = CellParameters(100.0, 1e-3, 0.0, 1 / 120, 0.0)
    cfg = SimConfig(mix, cell, PROPOSED, horizon=4e6, warmup=0.0, seed=9)
    durations = []
    trace = io.StringIO()
    run_replication(cfg, trace=trace)
    rows = [line.split(",") for line in trace.getvalue().splitlines()[1:]]
    start = None
    for t, kind, _, size, _ in rows:
        if kind == NEW and size == "1" and start is None:
            start = float(t)
        elif kind == "completion":
            durations.append(float(t) - start)
            start = None
    n = len(durations)
    assert n > 2000
    se = statistics.stdev(durations) / math.sqrt(n)
    assert abs(statistics.fmean(durations) - 120.0) <= 3 * se


def test_determinism_and_seed_sensitivity(ref_mix):
    cell = CellParameters(5000.0, 0.8, 0.4)
    cfg = SimConfig(ref_mix, cell, PROPOSED, horizon=5e3, seed=42)
    a, b, c = io.StringIO(), io.StringIO(), io.StringIO()
    sa = run_replication(cfg, 0, trace=a)
    sb = run_replication(cfg, 0, trace=b)
    run_replication(cfg, 1, trace=c)
    assert a.getvalue() == b.getvalue() and sa == sb
    assert a.getvalue() != c.getvalue()
    assert a.getvalue().splitlines()[0] == "time,kind,class,state_size,total_allocated"


def test_config_validation(single_mix, single_cell):
    with pytest.raises(ValueError):
        SimConfig(single_mix, single_cell, PROPOSED, horizon=10.0, warmup=10.0)
    with pytest.raises(ValueError):
        SimConfig(single_mix, single_cell, PROPOSED, horizon=10.0, replications=0)
    assert SimConfig(single_mix, single_cell, PROPOSED, horizon=100.0).warmup == 10.0


# -- aggregation -------------------------------------------------------------------

def _stats(p):
    return SimStats(p, p / 2, 0.5, 80.0, 0.3, 100, int(100 * p), 50, int(25 * p))


def test_aggregate_identical_replications_zero_halfwidth():
    agg = aggregate([_stats(0.1)] * 5)
    assert agg.p_block == pytest.approx(0.1) and agg.ci_block == 0.0 and agg.ci_util == 0.0
    assert agg.replications == 5 and agg.offered_new == 500


def test_aggregate_single_replication_has_no_ci():
    agg = aggregate([_stats(0.2)])
    assert agg.p_block == 0.2 and agg.ci_block is None and agg.ci_drop is None


def test_aggregate_halfwidth_formula():
    agg = aggregate([_stats(p) for p in (0.1, 0.2, 0.3)])
    # t(0.975, 2) = 4.302652729911275, sample sd = 0.1
    assert agg.ci_block == pytest.approx(4.302652729911275 * 0.1 / math.sqrt(3), rel=1e-9)


@pytest.mark.slow
def test_ci_coverage_meta_trials(rt_mix, single_cell):
    covered = 0
    for trial in range(20):
        cfg = SimConfig(rt_mix, single_cell, SchemePolicy.hard(), horizon=5e4, replications=20, seed=1000 + trial)
        st = simulate(cfg)
        covered += abs(st.p_block - ERLANG_B_10_5) <= st.ci_block
    assert covered >= 18
