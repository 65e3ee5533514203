import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from core.errors import BudgetExceededBeforeFirstReturnError, UnknownActionError
from core.network import StaticScheduler
from core.simulator import (
    ARRIVAL,
    PathDependentPolicy,
    SimState,
    SimulationEngine,
    StaticPolicy,
    UniformStream,
    estimate_exponential_moment,
    expected_jump_distribution,
    flow_balance,
    jump_distribution,
    run_cycles,
    run_replicas,
    simulate_replica,
    step,
    summarize,
    utilization_identity,
)
from cli.network_io import NetworkFile
from conftest import network_path
from network_factory import ThresholdPolicy, random_controlled_network


def pure_policy(net) -> StaticPolicy:
    return StaticPolicy(StaticScheduler.deterministic(q.actions[0].id for q in net.queues))


def test_step_from_empty_state_is_an_arrival(fig1):
    policy = pure_policy(fig1)
    state, record = step(fig1, policy, SimState.empty(2), UniformStream(0))
    assert state.queues == (1, 0)
    assert record.winner == ARRIVAL
    assert record.action is None
    assert state.clock > 0 and record.time == state.clock


def test_expected_jump_law(fig1):
    law = expected_jump_distribution(fig1, pure_policy(fig1), (1, 1))
    assert law == {
        (2, 1): F(7, 24),
        (0, 3): F(1, 12),
        (0, 1): F(1, 3),
        (1, 0): F(7, 24),
    }


def test_empirical_jump_law(fig1):
    policy = pure_policy(fig1)
    law = expected_jump_distribution(fig1, policy, (1, 1))
    samples = 20000
    counts = jump_distribution(fig1, policy, (1, 1), samples, seed=7)
    assert set(counts) <= set(law)
    keys = sorted(law)
    observed = [counts.get(k, 0) for k in keys]
    expected = [float(law[k]) * samples for k in keys]
    assert stats.chisquare(observed, expected).pvalue > 1e-4


def test_threshold_policy_jump_law(ctrl):
    policy = ThresholdPolicy(ctrl, queue=0, watched=1, threshold=2, below="a", above="b")
    assert expected_jump_distribution(ctrl, policy, (1, 0)) == {(2, 0): F(1, 5), (0, 1): F(4, 5)}
    assert expected_jump_distribution(ctrl, policy, (1, 3)) == {
        (2, 3): F(2, 11),
        (0, 3): F(8, 11),
        (1, 2): F(1, 11),
    }


def test_threshold_policy_fires_both_actions(ctrl):
    policy = ThresholdPolicy(ctrl, queue=0, watched=1, threshold=2, below="a", above="b")
    report = run_cycles(ctrl, policy, seed=1, cycle_budget=2000)
    assert report.firing(0, "a") > 0
    assert report.firing(0, "b") > 0


def test_path_dependent_policy_sees_bounded_history(ctrl):
    lengths: list[int] = []

    def rule(history, state):
        lengths.append(len(history))
        previous = history[-1].winner if history else None
        send = previous == ARRIVAL and state[1] == 0
        return [{"a": 1} if send else {"b": 1}, {"a": 1}]

    report = run_cycles(ctrl, PathDependentPolicy(rule, window=3), seed=2, cycle_budget=500)
    assert report.cycles == 500
    assert lengths and max(lengths) == 3
    assert report.firing(0, "a") > 0 and report.firing(0, "b") > 0


def test_step_keeps_path_history_in_shared_engine(ctrl):
    policy = PathDependentPolicy(lambda history, state: [{"b": 1}, {"a": 1}], window=3)
    with pytest.raises(ValueError):
        step(ctrl, policy, SimState.empty(2), UniformStream(0))

    engine = SimulationEngine(ctrl, policy)
    stream = UniformStream(0)
    state = SimState.empty(2)
    records = []
    for count in range(1, 6):
        state, record = step(ctrl, policy, state, stream, engine)
        records.append(record)
        assert len(engine.history) == min(count, 3)
    assert list(engine.history) == records[-3:]


def test_unknown_action_is_rejected(ctrl):
    with pytest.raises(UnknownActionError):
        SimulationEngine(ctrl, StaticPolicy(StaticScheduler.from_mappings([{"z": 1}, {"a": 1}])))


def test_replica_streams_are_independent():
    assert UniformStream(5).next() == UniformStream(5).next()
    assert UniformStream(5, 0).next() != UniformStream(5, 1).next()


def test_same_seed_same_report(fig1):
    first = run_cycles(fig1, pure_policy(fig1), seed=11, cycle_budget=300)
    second = run_cycles(fig1, pure_policy(fig1), seed=11, cycle_budget=300)
    other = run_cycles(fig1, pure_policy(fig1), seed=12, cycle_budget=300)
    assert first.occupancy == second.occupancy
    assert first.trace == second.trace
    np.testing.assert_array_equal(first.firing_freq, second.firing_freq)
    assert first.total_time != other.total_time


def test_run_replicas_merges_in_replica_order(fig1):
    policy = pure_policy(fig1)
    report = run_replicas(fig1, policy, seed=3, cycle_budget=200, replicas=3)
    logs = [simulate_replica(fig1, policy, 3, 200, replica=r) for r in range(3)]
    merged = summarize(logs, seed=3)
    assert report.cycles == 600
    assert report.replicas == 3
    assert report.occupancy == merged.occupancy
    assert report.total_time == pytest.approx(merged.total_time)
    assert report.trace == tuple(logs[0].trace)


def test_npf_utilization(npf):
    report = run_cycles(npf, pure_policy(npf), seed=4, cycle_budget=20000)
    for value, hw in zip(report.utilization, report.utilization_hw):
        assert abs(value - 1 / 3) <= 4 * hw + 0.01
    assert report.arrival_freq == pytest.approx(1.0, rel=0.05)


def test_identities_hold_on_fig1(fig1):
    report = run_cycles(fig1, pure_policy(fig1), seed=5, cycle_budget=20000)
    assert flow_balance(report, fig1).within(factor=3.0)
    assert utilization_identity(report, fig1).within(factor=3.0)
    assert sum(report.size_histogram) == pytest.approx(1.0)
    assert report.occupancy_mass() <= 1 + 1e-9


def test_exponential_moment(fig1):
    report = run_cycles(fig1, pure_policy(fig1), seed=6, cycle_budget=5000)
    assert estimate_exponential_moment(report, 0.0).value == 1.0
    assert math.isfinite(report.tail.rate) and report.tail.rate > 0
    small = estimate_exponential_moment(report, report.tail.rate / 2)
    assert not small.diverged and small.value > 1.0
    assert estimate_exponential_moment(report, report.tail.rate * 2).diverged


def _budget_failures(net, policy, seeds=range(20)):
    failures = []
    for seed in seeds:
        try:
            simulate_replica(net, policy, seed, cycle_budget=10, time_budget=500.0)
        except BudgetExceededBeforeFirstReturnError as e:
            failures.append(e)
    return failures


def test_overloaded_exceeds_budget(overloaded):
    failures = _budget_failures(overloaded, pure_policy(overloaded))
    assert failures
    assert all(e.clock == 500.0 for e in failures)
    assert max(size for _, size in failures[0].trace) > 100


def test_ctrl_pure_a_exceeds_budget(ctrl):
    scheduler = NetworkFile.load_scheduler(network_path("ctrl_pure_a"), ctrl)
    failures = _budget_failures(ctrl, StaticPolicy(scheduler))
    assert failures
    assert max(size for _, size in failures[0].trace) > 50


@settings(max_examples=25)
@given(st.integers(min_value=0, max_value=10_000))
def test_occupancy_is_a_subprobability(seed):
    net = random_controlled_network(seed, pure=True)
    try:
        report = run_cycles(net, pure_policy(net), seed=seed, cycle_budget=50, time_budget=200.0)
    except BudgetExceededBeforeFirstReturnError:
        return
    assert report.occupancy_mass() <= 1 + 1e-9
    assert all(0.0 <= u <= 1.0 for u in report.utilization)
    assert all(len(state) == net.n and min(state) >= 0 for state in report.occupancy)
