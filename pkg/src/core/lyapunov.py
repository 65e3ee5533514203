"""Fonction de Lyapunov linéaire par morceaux et certification de dérive.

V(x) = max_i x.q^(i), où q^(i) est la colonne i de A* divisée par sa norme
1. Pour un réseau déficient, la dérive moyenne Delta(x).q^(i) vaut au plus
-gamma sur chaque indice i qui réalise le maximum, avec
gamma = min_i (mu_i - lambda_i) / ||a^(i)||.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Final, Iterable

import numpy as np

from core.errors import CertificationFailedError, NotDeficientError
from core.network import Network
from core.numeric import NumberMode, Scalar, convert, identity, is_zero, max_abs, zeros
from core.simplex import LpStatus, solve_standard_form
from core.traffic import TrafficData, compute_moments
from utils.logging_config import get_app_logger


# Marge tolérée sur -gamma en mode flottant
DRIFT_SLACK: Final[float] = 1e-9


@dataclass(frozen=True, eq=False)
class LyapunovData:
    """Vecteurs q^(i) et borne de dérive d'un réseau pur."""

    q: np.ndarray
    """Ligne i = q^(i) (colonne i de A* normalisée)."""

    gamma: Scalar
    """min_i (mu_i - lambda_i) / ||a^(i)||; positif ssi le trafic est déficient."""

    traffic: TrafficData

    @property
    def n(self) -> int:
        """Nombre de files."""
        return self.q.shape[0]

    @property
    def mode(self) -> NumberMode:
        """Mode numérique hérité du trafic."""
        return self.traffic.mode


def build_lyapunov(traffic: TrafficData) -> LyapunovData:
    """Construit les q^(i) et gamma à partir des données de trafic."""
    q: np.ndarray = (traffic.star / traffic.col_norms).T.copy()
    gamma: Scalar = min((traffic.mu - traffic.lam) / traffic.col_norms)
    return LyapunovData(q=q, gamma=gamma, traffic=traffic)


def _ties(values: Iterable[Scalar], top: Scalar, mode: NumberMode) -> frozenset[int]:
    """Indices dont la valeur atteint top (égalité exacte en mode rationnel)."""
    return frozenset(i for i, value in enumerate(values) if is_zero(top - value, mode))


def lyapunov_value(ld: LyapunovData, x: Iterable[Scalar | int]) -> tuple[Scalar, frozenset[int]]:
    """Évalue V(x) et l'ensemble des indices qui réalisent le maximum.

    Args:
        ld: Données de Lyapunov
        x: État (vecteur positif ou nul de longueur n)

    Returns:
        Tuple (V(x), indices argmax à partir de 0)
    """
    point: np.ndarray = np.array([convert(v, ld.mode) for v in x], dtype=ld.mode.dtype)
    values: np.ndarray = ld.q @ point
    top: Scalar = max(values)
    return top, _ties(values, top, ld.mode)


def velocity_for_support(
    alpha: np.ndarray,
    mean_matrix: np.ndarray,
    mu: np.ndarray,
    support: Iterable[int],
    mode: NumberMode,
) -> np.ndarray:
    """Delta = alpha + somme_{i in support} mu_i (-e^(i) + A_i)."""
    eye: np.ndarray = identity(len(alpha), mode)
    velocity: np.ndarray = alpha.copy()
    for i in support:
        velocity = velocity + mu[i] * (mean_matrix[i] - eye[i])
    return velocity


def mean_velocity(net: Network, x: Iterable[Scalar | int], mode: NumberMode = NumberMode.RATIONAL) -> np.ndarray:
    """Vecteur vitesse moyenne Delta(x) d'un réseau pur.

    Ne dépend que du support de x.
    """
    alpha, mean_matrix = compute_moments(net, mode)
    mu: np.ndarray = np.array([convert(r, mode) for r in net.rates], dtype=mode.dtype)
    support: list[int] = [i for i, value in enumerate(x) if value != 0]
    return velocity_for_support(alpha, mean_matrix, mu, support, mode)


def drift_bound(ld: LyapunovData) -> Scalar:
    """Retourne gamma après vérification de la déficience.

    Raises:
        NotDeficientError: Si lambda_i >= mu_i pour une file
    """
    traffic: TrafficData = ld.traffic
    saturated: tuple[int, ...] = tuple(
        i for i in range(traffic.n) if not traffic.lam[i] < traffic.mu[i]
    )
    if saturated:
        queues: str = ", ".join(str(i + 1) for i in saturated)
        raise NotDeficientError(f"lambda_i >= mu_i pour les files {queues}", queues=saturated)
    return ld.gamma


@dataclass(frozen=True)
class MaxPropertyReport:
    """Pour chaque i: aucun x >= 0 non nul avec x_i = 0 ne fait de q^(i) un maximum."""

    holds: tuple[bool, ...]
    witnesses: dict[int, tuple[Scalar, ...]] = field(default_factory=dict)
    """Contre-exemples x (normalisés à somme 1) pour les indices en défaut."""

    @property
    def ok(self) -> bool:
        """True si la propriété tient pour tous les indices."""
        return all(self.holds)


def _attaining_system(
    ld: LyapunovData,
    index: int,
    zero_queues: Iterable[int],
) -> tuple[list[list[Scalar]], list[Scalar], int]:
    """Lignes x.q^(index) - x.q^(j) - s_j = 0, sum x = 1 et x_k = 0.

    Variables: x (n) puis un écart par j != index.

    Returns:
        Tuple (lignes, second membre, nombre de variables)
    """
    mode: NumberMode = ld.mode
    n: int = ld.n
    others: list[int] = [j for j in range(n) if j != index]
    width: int = n + len(others)
    zero: Scalar = convert(0, mode)
    one: Scalar = convert(1, mode)

    rows: list[list[Scalar]] = []
    rhs: list[Scalar] = []
    for slot, j in enumerate(others):
        row: list[Scalar] = [ld.q[index, k] - ld.q[j, k] for k in range(n)] + [zero] * len(others)
        row[n + slot] = -one
        rows.append(row)
        rhs.append(zero)
    rows.append([one] * n + [zero] * len(others))
    rhs.append(one)
    for k in zero_queues:
        row = [zero] * width
        row[k] = one
        rows.append(row)
        rhs.append(zero)
    return rows, rhs, width


def check_max_property(ld: LyapunovData) -> MaxPropertyReport:
    """Vérifie par faisabilité LP que x_i = 0 implique x.q^(i) < V(x).

    Une solution faisable est un témoin de violation; elle est consignée.
    """
    mode: NumberMode = ld.mode
    if ld.n == 1:
        return MaxPropertyReport(holds=(True,))

    holds: list[bool] = []
    witnesses: dict[int, tuple[Scalar, ...]] = {}
    for i in range(ld.n):
        rows, rhs, width = _attaining_system(ld, i, [i])
        result = solve_standard_form(
            np.array(rows, dtype=mode.dtype), np.array(rhs, dtype=mode.dtype), zeros(width, mode), mode
        )
        if result.status is LpStatus.OPTIMAL and result.x is not None:
            holds.append(False)
            witnesses[i] = tuple(result.x[: ld.n])
            get_app_logger().error(f"Propriété du maximum en défaut pour la file {i + 1}: x={witnesses[i]}")
        else:
            holds.append(True)
    return MaxPropertyReport(holds=tuple(holds), witnesses=witnesses)


def region_nonempty(ld: LyapunovData, support: frozenset[int], index: int) -> bool:
    """Décide si {x : supp(x) = support, x.q^(index) = V(x)} est non vide.

    On maximise t sous x_k >= t pour k dans le support; la région est non
    vide ssi l'optimum est strictement positif.
    """
    mode: NumberMode = ld.mode
    n: int = ld.n
    outside: list[int] = [k for k in range(n) if k not in support]
    inside: list[int] = sorted(support)
    rows, rhs, width = _attaining_system(ld, index, outside)

    # Colonnes supplémentaires: t puis un écart par file du support
    zero: Scalar = convert(0, mode)
    one: Scalar = convert(1, mode)
    extra: int = 1 + len(inside)
    rows = [row + [zero] * extra for row in rows]
    for slot, k in enumerate(inside):
        row: list[Scalar] = [zero] * (width + extra)
        row[k] = one
        row[width] = -one
        row[width + 1 + slot] = -one
        rows.append(row)
        rhs.append(zero)

    cost: np.ndarray = zeros(width + extra, mode)
    cost[width] = -one
    result = solve_standard_form(
        np.array(rows, dtype=mode.dtype), np.array(rhs, dtype=mode.dtype), cost, mode
    )
    if result.status is not LpStatus.OPTIMAL or result.x is None:
        return False
    return not is_zero(result.x[width], mode) and result.x[width] > 0


@dataclass(frozen=True)
class PatternMargin:
    """Marges de dérive d'un motif de support."""

    support: frozenset[int]
    velocity: tuple[Scalar, ...]
    """Delta(x) pour tout x de ce support."""

    margins: tuple[tuple[int, Scalar], ...]
    """Couples (i, Delta.q^(i)) pour les indices vérifiés."""

    passed: bool


@dataclass(frozen=True)
class DriftCertificate:
    """Certificat de dérive négative sur tous les motifs de support."""

    gamma: Scalar
    patterns: tuple[PatternMargin, ...]
    exact_regions: bool
    mode: NumberMode = NumberMode.RATIONAL

    @property
    def passed(self) -> bool:
        """True si tous les motifs passent."""
        return all(pattern.passed for pattern in self.patterns)

    @property
    def worst_margin(self) -> Scalar | None:
        """Plus grande marge observée (la plus proche de 0)."""
        margins: list[Scalar] = [m for pattern in self.patterns for _, m in pattern.margins]
        return max(margins) if margins else None


def support_patterns(n: int) -> list[frozenset[int]]:
    """Motifs non vides, dans l'ordre des masques binaires 1 .. 2^n - 1."""
    return [frozenset(i for i in range(n) if mask >> i & 1) for mask in range(1, 1 << n)]


def certify_drift(
    net: Network,
    ld: LyapunovData,
    exact_regions: bool = False,
    strict: bool = True,
) -> DriftCertificate:
    """Certifie Delta(x).q^(i) <= -gamma pour tout x != 0 et tout i réalisant V(x).

    Par défaut, les indices vérifiés sur un support S sont S et les indices
    pour lesquels la propriété du maximum est en défaut (sur-ensemble sûr).
    Avec exact_regions, seuls les indices dont la région est non vide
    (faisabilité LP) sont vérifiés.

    Args:
        net: Réseau pur analysé
        ld: Données de Lyapunov du réseau
        exact_regions: Active le calcul exact des indices atteignables
        strict: Lève CertificationFailedError en cas d'échec

    Returns:
        DriftCertificate

    Raises:
        NotDeficientError: Si le trafic n'est pas déficient
        CertificationFailedError: Si strict et une marge dépasse -gamma
    """
    logger = get_app_logger()
    gamma: Scalar = drift_bound(ld)
    mode: NumberMode = ld.mode
    traffic: TrafficData = ld.traffic
    threshold: Scalar = -gamma if mode.is_exact else -gamma + DRIFT_SLACK

    failing_max: set[int] = set()
    if not exact_regions:
        report: MaxPropertyReport = check_max_property(ld)
        failing_max = {i for i, ok in enumerate(report.holds) if not ok}

    patterns: list[PatternMargin] = []
    first_failure: tuple[frozenset[int], int, Scalar] | None = None
    for support in support_patterns(ld.n):
        velocity: np.ndarray = velocity_for_support(
            traffic.alpha, traffic.mean_matrix, traffic.mu, sorted(support), mode
        )
        if exact_regions:
            indices: list[int] = [i for i in range(ld.n) if region_nonempty(ld, support, i)]
        else:
            indices = sorted(support | failing_max)

        margins: list[tuple[int, Scalar]] = [(i, velocity @ ld.q[i]) for i in indices]
        passed: bool = all(margin <= threshold for _, margin in margins)
        if not passed and first_failure is None:
            index, margin = next((i, m) for i, m in margins if not m <= threshold)
            first_failure = (support, index, margin)
        patterns.append(PatternMargin(support, tuple(velocity), tuple(margins), passed))

    certificate: DriftCertificate = DriftCertificate(gamma, tuple(patterns), exact_regions, mode)
    logger.debug(
        f"Certification de dérive de {net.name or 'réseau'}: {len(patterns)} motifs, "
        f"réussite={certificate.passed}"
    )
    if first_failure is not None and strict:
        support, index, margin = first_failure
        logger.error(f"Dérive non certifiée sur le support {sorted(i + 1 for i in support)}")
        raise CertificationFailedError(support, index, margin, certificate)
    return certificate


@dataclass(frozen=True, eq=False)
class CancellationReport:
    """Produits (-e^(i) + A_i).q^(j) et leurs valeurs attendues."""

    values: np.ndarray
    expected: np.ndarray
    max_residual: Scalar
    mode: NumberMode = NumberMode.RATIONAL

    @property
    def holds(self) -> bool:
        """True si toutes les identités sont vérifiées (à 1e-12 près en flottant)."""
        return is_zero(self.max_residual, self.mode)


def cancellation_identities(ld: LyapunovData) -> CancellationReport:
    """Calcule (-e^(i) + A_i).q^(j): -1/||a^(j)|| si i = j, 0 sinon."""
    mode: NumberMode = ld.mode
    traffic: TrafficData = ld.traffic
    step: np.ndarray = traffic.mean_matrix - identity(ld.n, mode)
    values: np.ndarray = step @ ld.q.T
    expected: np.ndarray = zeros((ld.n, ld.n), mode)
    for j in range(ld.n):
        expected[j, j] = -convert(1, mode) / traffic.col_norms[j]
    return CancellationReport(values, expected, max_abs(values - expected), mode)


def drift_expansion_residuals(ld: LyapunovData) -> np.ndarray:
    """Résidus alpha.q^(j) - lambda_j / ||a^(j)|| (nuls en mode exact)."""
    traffic: TrafficData = ld.traffic
    return ld.q @ traffic.alpha - traffic.lam / traffic.col_norms
