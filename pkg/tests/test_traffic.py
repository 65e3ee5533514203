from dataclasses import replace
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from core.errors import DivergentError, NetworkValidationError
from core.network import Action, ProductionFunction
from core.numeric import NumberMode
from core.traffic import compute_moments, solve_traffic, star_matrix
from network_factory import (
    empty,
    pure_network,
    pure_networks,
    random_controlled_network,
    single_queue,
    subcritical_matrices,
    unit,
)


def test_fig1_exact(fig1):
    traffic = solve_traffic(fig1)
    assert list(traffic.alpha) == [F(7, 30), 0]
    assert traffic.star.tolist() == [[F(25, 23), F(12, 23)], [F(5, 23), F(30, 23)]]
    assert list(traffic.lam) == [F(35, 138), F(14, 115)]
    assert list(traffic.col_norms) == [F(30, 23), F(42, 23)]
    assert list(traffic.utilization) == [F(14, 23), F(8, 23)]
    assert traffic.deficient
    assert traffic.residual() == 0


def test_fig1_float_matches_exact(fig1):
    exact = solve_traffic(fig1)
    approx = solve_traffic(fig1, NumberMode.FLOAT)
    np.testing.assert_allclose(approx.lam, [float(v) for v in exact.lam], rtol=1e-12)
    assert approx.residual() <= 1e-12
    assert approx.deficient


def test_npf(npf):
    traffic = solve_traffic(npf)
    assert list(traffic.lam) == [1, 1]
    assert list(traffic.utilization) == [F(1, 3), F(1, 3)]


def test_netproc(netproc):
    traffic = solve_traffic(netproc)
    assert list(traffic.lam) == [F(29, 50), F(29, 250), F(29, 50), F(3, 10), F(3, 10)]
    assert traffic.deficient


def test_overloaded_is_not_deficient(overloaded):
    traffic = solve_traffic(overloaded)
    assert list(traffic.lam) == [2]
    assert not traffic.deficient


@pytest.mark.parametrize(
    "pairs",
    [
        [((1,), 1)],
        [((2,), 1)],
        [((2,), F(3, 4)), ((0,), F(1, 4))],
    ],
)
def test_supercritical_single_queue_diverges(pairs):
    net = pure_network(1, [((1,), 1)], [(1, pairs)], K=2)
    with pytest.raises(DivergentError):
        solve_traffic(net)


def test_unreachable_queue_is_rejected_unless_allowed():
    net = pure_network(1, [((1, 0), 1)], [(2, [((0, 0), 1)]), (3, [((0, 0), 1)])], K=1)
    with pytest.raises(NetworkValidationError):
        solve_traffic(net)
    traffic = solve_traffic(net, require_reachable=False)
    assert list(traffic.lam) == [1, 0]


def test_mm1():
    traffic = solve_traffic(single_queue(1, 3))
    assert list(traffic.utilization) == [F(1, 3)]


@pytest.mark.parametrize("seed", range(30))
def test_random_pure_networks_satisfy_traffic_equations(seed):
    net = random_controlled_network(seed, pure=True)
    traffic = solve_traffic(net)
    alpha, mean_matrix = compute_moments(net)
    assert list(traffic.lam) == list(alpha + traffic.lam @ mean_matrix)
    assert all(v >= 0 for v in np.ravel(traffic.star))


@given(subcritical_matrices())
def test_star_matrix_matches_neumann_sum(mean_matrix):
    size = len(mean_matrix)
    term = np.eye(size)
    total = np.eye(size)
    for _ in range(200):
        term = term @ mean_matrix
        total = total + term
    np.testing.assert_allclose(star_matrix(mean_matrix, NumberMode.FLOAT), total, rtol=0, atol=1e-8)


@given(pure_networks)
def test_column_norms_are_at_least_one(net):
    assert all(norm >= 1 for norm in solve_traffic(net).col_norms)


def _with_extra_offspring(production: ProductionFunction, target: tuple[int, ...], amount: F) -> ProductionFunction:
    """Déplace amount de la production vide vers target."""
    masses = production.as_dict()
    blank = empty(len(target))
    masses[blank] -= amount
    masses[target] = masses.get(target, F(0)) + amount
    return ProductionFunction.from_pairs((offspring, p) for offspring, p in masses.items() if p)


@given(pure_networks, st.data())
def test_lambda_is_monotone_in_offspring(net, data):
    i = data.draw(st.integers(0, net.n - 1))
    j = data.draw(st.integers(0, net.n - 1))
    queues = list(net.queues)
    production = queues[i].actions[0].production
    queues[i] = replace(queues[i], actions=(Action("a", _with_extra_offspring(production, unit(net.n, j), F(1, 10))),))
    bumped = replace(net, queues=tuple(queues))

    before = solve_traffic(net).lam
    after = solve_traffic(bumped).lam
    assert all(a >= b for a, b in zip(after, before))
    assert after[j] > before[j]


@given(pure_networks, st.fractions(min_value=1, max_value=4, max_denominator=5))
def test_lambda_is_monotone_in_arrivals(net, factor):
    before = solve_traffic(net).lam
    after = solve_traffic(replace(net, arrival_rate=net.arrival_rate * factor)).lam
    assert list(after) == [factor * v for v in before]
    assert all(a >= b for a, b in zip(after, before))
