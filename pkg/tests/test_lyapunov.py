from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from core.errors import CertificationFailedError, NotDeficientError
from core.lyapunov import (
    LyapunovData,
    build_lyapunov,
    cancellation_identities,
    certify_drift,
    check_max_property,
    drift_bound,
    drift_expansion_residuals,
    lyapunov_value,
    mean_velocity,
    region_nonempty,
    support_patterns,
)
from core.network import StaticScheduler, induce_pure_network
from core.numeric import NumberMode
from core.traffic import solve_traffic
from network_factory import pure_networks, random_controlled_network


@pytest.fixture
def fig1_lyapunov(fig1) -> LyapunovData:
    return build_lyapunov(solve_traffic(fig1))


def test_fig1_vectors(fig1_lyapunov):
    assert fig1_lyapunov.q.tolist() == [[F(5, 6), F(1, 6)], [F(2, 7), F(5, 7)]]
    assert fig1_lyapunov.gamma == F(1, 8)
    assert all(sum(row) == 1 for row in fig1_lyapunov.q.tolist())


def test_fig1_lyapunov_value(fig1_lyapunov):
    value, ties = lyapunov_value(fig1_lyapunov, [6, 0])
    assert value == 5
    assert ties == {0}
    value, ties = lyapunov_value(fig1_lyapunov, [0, 0])
    assert value == 0
    assert ties == {0, 1}


@pytest.mark.parametrize(
    "x, expected",
    [
        ((3, 0), [F(-11, 60), F(1, 6)]),
        ((0, 2), [F(7, 24), F(-7, 24)]),
        ((1, 5), [F(-1, 8), F(-1, 8)]),
        ((0, 0), [F(7, 30), 0]),
    ],
)
def test_fig1_mean_velocity_depends_on_support(fig1, x, expected):
    assert list(mean_velocity(fig1, x)) == expected


def test_fig1_certificate(fig1, fig1_lyapunov):
    certificate = certify_drift(fig1, fig1_lyapunov)
    assert certificate.passed
    assert certificate.gamma == F(1, 8)
    assert [sorted(p.support) for p in certificate.patterns] == [[0], [1], [0, 1]]
    assert all(margin == F(-1, 8) for p in certificate.patterns for _, margin in p.margins)
    assert certificate.worst_margin == F(-1, 8)


def test_fig1_exact_regions(fig1, fig1_lyapunov):
    certificate = certify_drift(fig1, fig1_lyapunov, exact_regions=True)
    assert certificate.passed
    indices = {p.support: [i for i, _ in p.margins] for p in certificate.patterns}
    assert indices[frozenset({0})] == [0]
    assert indices[frozenset({1})] == [1]
    assert indices[frozenset({0, 1})] == [0, 1]
    assert not region_nonempty(fig1_lyapunov, frozenset({0}), 1)


def test_fig1_float_certificate(fig1):
    ld = build_lyapunov(solve_traffic(fig1, NumberMode.FLOAT))
    certificate = certify_drift(fig1, ld)
    assert certificate.passed
    assert float(certificate.worst_margin) == pytest.approx(-0.125, abs=1e-12)


def test_max_property(fig1_lyapunov):
    report = check_max_property(fig1_lyapunov)
    assert report.ok
    assert report.witnesses == {}


def test_cancellation_identities(fig1_lyapunov):
    report = cancellation_identities(fig1_lyapunov)
    assert report.holds
    assert report.values[0, 0] == F(-23, 30)
    assert report.values[1, 1] == F(-23, 42)
    assert report.values[0, 1] == 0 and report.values[1, 0] == 0


def test_drift_expansion_residuals(fig1_lyapunov):
    assert list(drift_expansion_residuals(fig1_lyapunov)) == [0, 0]


def test_overloaded_is_rejected(overloaded):
    ld = build_lyapunov(solve_traffic(overloaded))
    assert ld.gamma == -1
    with pytest.raises(NotDeficientError) as info:
        drift_bound(ld)
    assert info.value.queues == (0,)
    with pytest.raises(NotDeficientError):
        certify_drift(overloaded, ld)


def test_certification_failure_is_reported(fig1, fig1_lyapunov):
    inflated = LyapunovData(q=fig1_lyapunov.q, gamma=F(1, 4), traffic=fig1_lyapunov.traffic)
    certificate = certify_drift(fig1, inflated, strict=False)
    assert not certificate.passed
    with pytest.raises(CertificationFailedError) as info:
        certify_drift(fig1, inflated)
    assert info.value.support == frozenset({0})
    assert info.value.index == 0
    assert info.value.margin == F(-1, 8)
    assert not info.value.certificate.passed


def test_ctrl_induced_certificate(ctrl):
    pure = induce_pure_network(ctrl, StaticScheduler.from_mappings([{"b": 1}, {"a": 1}]))
    ld = build_lyapunov(solve_traffic(pure, require_reachable=False))
    assert ld.gamma == F(1, 2)
    certificate = certify_drift(pure, ld)
    assert certificate.passed
    velocities = {p.support: list(p.velocity) for p in certificate.patterns}
    assert velocities[frozenset({0})] == [-3, 0]
    assert velocities[frozenset({1})] == [1, F(-1, 2)]


def test_support_patterns():
    assert support_patterns(1) == [frozenset({0})]
    assert len(support_patterns(4)) == 15
    assert frozenset() not in support_patterns(3)


@pytest.mark.parametrize("seed", range(200))
def test_certificate_passes_iff_deficient(seed):
    net = random_controlled_network(seed, pure=True)
    traffic = solve_traffic(net)
    ld = build_lyapunov(traffic)
    assert check_max_property(ld).ok
    assert cancellation_identities(ld).holds
    if traffic.deficient:
        certificate = certify_drift(net, ld)
        assert certificate.passed
        assert certificate.worst_margin <= -ld.gamma
    else:
        with pytest.raises(NotDeficientError):
            certify_drift(net, ld)


@given(
    pure_networks,
    st.lists(st.integers(0, 20), min_size=3, max_size=3),
    st.fractions(min_value=0, max_value=10, max_denominator=7),
)
def test_lyapunov_value_is_positively_homogeneous(net, point, factor):
    ld = build_lyapunov(solve_traffic(net))
    x = point[: net.n]
    value, ties = lyapunov_value(ld, x)
    scaled, scaled_ties = lyapunov_value(ld, [factor * v for v in x])
    assert scaled == factor * value
    assert (value == 0) == (not any(x))
    if factor > 0:
        assert scaled_ties == ties
