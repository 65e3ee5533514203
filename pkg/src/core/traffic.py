"""Équations de trafic des réseaux purement stochastiques.

Ce module calcule:
- Les moments alpha (arrivées externes) et A (production moyenne)
- La matrice A* = (I - A)^-1 et ses normes de colonnes
- La solution lambda = alpha + lambda A et son caractère déficient
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from core.errors import DivergentError, NetworkValidationError, SingularMatrixError
from core.network import Network, reachable_queues
from core.numeric import (
    NumberMode,
    Scalar,
    all_less,
    all_nonnegative,
    convert,
    identity,
    invert,
    max_abs,
    vector,
    zeros,
)
from utils.logging_config import get_app_logger


@dataclass(frozen=True, eq=False)
class TrafficData:
    """Quantités analytiques dérivées d'un réseau pur."""

    alpha: np.ndarray
    """Arrivées externes moyennes par file et par unité de temps."""

    mean_matrix: np.ndarray
    """Matrice A: production moyenne de j-jobs quand la file i tire."""

    star: np.ndarray
    """A* = (I - A)^-1."""

    col_norms: np.ndarray
    """Normes 1 des colonnes de A*."""

    lam: np.ndarray
    """Solution lambda des équations de trafic."""

    mu: np.ndarray
    """Taux de service."""

    deficient: bool
    """True si lambda < mu strictement sur chaque file."""

    mode: NumberMode = NumberMode.RATIONAL

    @property
    def n(self) -> int:
        """Nombre de files."""
        return len(self.alpha)

    @property
    def utilization(self) -> np.ndarray:
        """Rapports lambda_i / mu_i."""
        return self.lam / self.mu

    def residual(self) -> Scalar:
        """Norme infinie de lambda - alpha - lambda A (nulle en mode exact)."""
        return max_abs(self.lam - self.alpha - self.lam @ self.mean_matrix)


def compute_moments(net: Network, mode: NumberMode = NumberMode.RATIONAL) -> tuple[np.ndarray, np.ndarray]:
    """Calcule alpha et la matrice A d'un réseau pur.

    alpha_i = mu_0 * somme_r Prob_0(r) r_i et A_ij = somme_r Prob_i(r) r_j.

    Args:
        net: Réseau purement stochastique
        mode: Mode numérique

    Returns:
        Tuple (alpha, A)

    Raises:
        NetworkValidationError: Si le réseau n'est pas pur
    """
    if not net.is_pure:
        raise NetworkValidationError("compute_moments exige un réseau purement stochastique")

    alpha_exact: tuple[Fraction, ...] = tuple(
        net.arrival_rate * m for m in net.arrival_production.mean_offspring(net.n)
    )
    rows: list[tuple[Fraction, ...]] = [
        queue.actions[0].production.mean_offspring(net.n) for queue in net.queues
    ]

    alpha: np.ndarray = vector(alpha_exact, mode)
    mean_matrix: np.ndarray = zeros((net.n, net.n), mode)
    for i, row in enumerate(rows):
        for j, value in enumerate(row):
            mean_matrix[i, j] = convert(value, mode)
    return alpha, mean_matrix


def action_means(net: Network, mode: NumberMode = NumberMode.RATIONAL) -> dict[tuple[int, str], np.ndarray]:
    """Production moyenne A_xi de chaque action (file, id) d'un réseau contrôlé."""
    return {
        (i, action.id): vector(action.production.mean_offspring(net.n), mode)
        for i, queue in enumerate(net.queues)
        for action in queue.actions
    }


def arrival_vector(net: Network, mode: NumberMode = NumberMode.RATIONAL) -> np.ndarray:
    """Vecteur alpha d'un réseau quelconque (ne dépend pas des actions)."""
    return vector((net.arrival_rate * m for m in net.arrival_production.mean_offspring(net.n)), mode)


def star_matrix(mean_matrix: np.ndarray, mode: NumberMode = NumberMode.RATIONAL) -> np.ndarray:
    """Calcule A* = (I - A)^-1.

    A* est accepté si I - A est inversible et si son inverse est
    entièrement positive ou nulle, ce qui équivaut pour A >= 0 à la
    convergence de la série de Neumann.

    Args:
        mean_matrix: Matrice A (positive ou nulle)
        mode: Mode numérique

    Returns:
        A*

    Raises:
        DivergentError: Si I - A est singulière ou si son inverse a une entrée négative
    """
    size: int = mean_matrix.shape[0]
    try:
        star: np.ndarray = invert(identity(size, mode) - mean_matrix, mode)
    except SingularMatrixError as e:
        get_app_logger().debug(f"I - A singulière: {e}")
        raise DivergentError("I - A est singulière: A* n'existe pas") from e

    if not all_nonnegative(star, mode):
        raise DivergentError("(I - A)^-1 a une entrée négative: la série A* diverge")
    return star


def solve_traffic(
    net: Network,
    mode: NumberMode = NumberMode.RATIONAL,
    require_reachable: bool = True,
) -> TrafficData:
    """Résout les équations de trafic lambda = alpha + lambda A.

    Args:
        net: Réseau pur dont toutes les files sont accessibles
        mode: Mode numérique
        require_reachable: Si False, les files inaccessibles reçoivent lambda_i = 0
            (réseaux induits par un ordonnanceur)

    Returns:
        TrafficData

    Raises:
        NetworkValidationError: Si une file est inaccessible
        DivergentError: Si A* n'existe pas
    """
    logger = get_app_logger()

    unreachable: list[int] = sorted(set(range(net.n)) - reachable_queues(net))
    if unreachable and require_reachable:
        queues: str = ", ".join(str(i + 1) for i in unreachable)
        logger.error(f"Files inaccessibles: {queues}")
        raise NetworkValidationError(f"Files inaccessibles depuis les arrivées: {queues}")

    alpha, mean_matrix = compute_moments(net, mode)
    star: np.ndarray = star_matrix(mean_matrix, mode)
    lam: np.ndarray = alpha @ star
    mu: np.ndarray = vector(net.rates, mode)
    col_norms: np.ndarray = star.sum(axis=0)
    deficient: bool = all_less(lam, mu)

    logger.debug(f"Trafic de {net.name or 'réseau'}: lambda={list(lam)}, déficient={deficient}")
    return TrafficData(
        alpha=alpha,
        mean_matrix=mean_matrix,
        star=star,
        col_norms=col_norms,
        lam=lam,
        mu=mu,
        deficient=deficient,
        mode=mode,
    )
