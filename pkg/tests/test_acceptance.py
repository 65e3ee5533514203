"""Comparaisons simulation / analyse / oracle sur les réseaux fournis."""

import math
from fractions import Fraction as F

import numpy as np
import pytest

from cli.network_io import NetworkFile
from cli.reports import budget_exceeded_to_dict
from core.errors import BudgetExceededBeforeFirstReturnError
from core.lyapunov import build_lyapunov
from core.network import StaticScheduler, induce_pure_network
from core.oracle import auto_bound, total_variation
from core.simulator import (
    StaticPolicy,
    estimate_exponential_moment,
    flow_balance,
    run_cycles,
    run_replicas,
    simulate_replica,
    utilization_identity,
)
from core.traffic import solve_traffic
from core.traffic_lp import is_stabilizable, synthesize_scheduler
from conftest import load_network, network_path


pytestmark = pytest.mark.slow


def pure_policy(net) -> StaticPolicy:
    return StaticPolicy(StaticScheduler.deterministic(q.actions[0].id for q in net.queues))


def synthesized_policy(net) -> StaticPolicy:
    _, solution = is_stabilizable(net)
    return StaticPolicy(synthesize_scheduler(net, solution))


@pytest.fixture(scope="module")
def fig1_report():
    net = load_network("fig1")
    return net, run_cycles(net, synthesized_policy(net), seed=2024, cycle_budget=100_000)


@pytest.fixture(scope="module")
def npf_report():
    net = load_network("npf")
    return net, run_replicas(net, pure_policy(net), seed=17, cycle_budget=50_000, replicas=4)


def test_fig1_utilization_matches_traffic(fig1_report):
    net, report = fig1_report
    assert report.cycles == 100_000
    expected = [F(14, 23), F(8, 23)]
    assert list(solve_traffic(net).utilization) == expected
    for value, hw, target in zip(report.utilization, report.utilization_hw, expected):
        assert abs(value - float(target)) <= 3 * hw


def test_fig1_flow_balance(fig1_report):
    net, report = fig1_report
    assert flow_balance(report, net).within(3.0)


def test_fig1_utilization_identity(fig1_report):
    net, report = fig1_report
    assert utilization_identity(report, net).within(3.0)


def test_fig1_firing_rates_match_lambda(fig1_report):
    net, report = fig1_report
    lam = [float(v) for v in solve_traffic(net).lam]
    for i, target in enumerate(lam):
        k = report.action_keys.index((i, "a"))
        assert abs(report.firing_freq[k] - target) <= 3 * report.firing_hw[k]


def test_fig1_occupancy_close_to_oracle(fig1_report):
    net, report = fig1_report
    result = auto_bound(net)
    assert result.shell_mass <= 1e-6
    assert total_variation(result.distribution, report.occupancy) <= 0.02


def test_fig1_exponential_moments(fig1_report):
    _, report = fig1_report
    rate = report.tail.rate
    assert math.isfinite(rate) and rate > 0
    values = [estimate_exponential_moment(report, rate * f).value for f in (0.0, 0.25, 0.5)]
    assert values[0] == 1.0
    assert values[0] < values[1] < values[2] < math.inf


def test_npf_occupancy_close_to_oracle(npf_report):
    net, report = npf_report
    result = auto_bound(net)
    assert result.shell_mass <= 1e-6
    assert total_variation(result.distribution, report.occupancy) <= 0.02


def test_npf_joint_busy_matches_oracle(npf_report):
    net, report = npf_report
    oracle = auto_bound(net).distribution
    joint = sum(p for state, p in report.occupancy.items() if all(state))
    assert joint == pytest.approx(float(oracle.joint_busy((0, 1))), abs=0.01)
    assert joint > 1 / 9 + 0.01
    np.testing.assert_allclose(report.utilization, [1 / 3, 1 / 3], atol=0.01)


def test_ctrl_synthesized_scheduler_is_positive_recurrent(ctrl):
    _, solution = is_stabilizable(ctrl)
    scheduler = synthesize_scheduler(ctrl, solution)
    induced = induce_pure_network(ctrl, scheduler)
    ld = build_lyapunov(solve_traffic(induced, require_reachable=False))
    assert ld.gamma > 0
    report = run_cycles(ctrl, StaticPolicy(scheduler), seed=5, cycle_budget=50_000)
    assert report.firing(0, "a") == 0.0
    assert report.firing(0, "b") == pytest.approx(1.0, rel=0.03)
    assert report.mean_return_time < math.inf


def test_ctrl_pure_a_trace_grows_without_return(ctrl):
    policy = StaticPolicy(NetworkFile.load_scheduler(network_path("ctrl_pure_a"), ctrl))
    # Première graine sans retour à 0 (un retour précoce arrive environ une fois sur deux)
    failure = None
    for seed in range(20):
        try:
            simulate_replica(ctrl, policy, seed, cycle_budget=10, time_budget=500.0)
        except BudgetExceededBeforeFirstReturnError as e:
            failure = e
            break
    assert failure is not None

    document = budget_exceeded_to_dict(failure.clock, failure.events, failure.trace)
    assert document["status"] == "budget_exceeded_before_first_return"
    assert document["clock"] == 500.0

    sizes = [size for _, size in failure.trace]
    quarter = len(sizes) // 4
    assert quarter > 0
    assert np.mean(sizes[-quarter:]) > np.mean(sizes[:quarter]) + 50
    assert sizes[-1] > 100


def test_netproc_utilization(netproc):
    report = run_cycles(netproc, pure_policy(netproc), seed=8, cycle_budget=50_000)
    expected = [float(u) for u in solve_traffic(netproc).utilization]
    for value, hw, target in zip(report.utilization, report.utilization_hw, expected):
        assert abs(value - target) <= 4 * hw + 2e-3
