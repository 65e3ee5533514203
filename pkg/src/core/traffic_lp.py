"""LP de trafic des réseaux contrôlés et synthèse de l'ordonnanceur statique.

Variables: delta puis un taux de tir lambda_xi par action, dans l'ordre
(file, id d'action lexicographique). Contraintes:
- flux: somme_{xi in Sigma_j} lambda_xi = alpha_j + somme_zeta lambda_zeta A_zeta_j
- utilisation: delta >= somme_{xi in Sigma_j} lambda_xi / mu_j
- lambda_xi >= 0
Objectif: min delta, puis, à delta = delta* fixé, min somme des lambda_xi
(choix du témoin de tir total minimal parmi les optimums).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Final

import numpy as np

from core.errors import DivergentError, NetworkValidationError, NotDeficientError
from core.network import Network, StaticScheduler, deterministic_schedulers, fallback_action, induce_pure_network
from core.numeric import NumberMode, Scalar, convert, is_zero, vector, zeros
from core.simplex import LpStatus, solve_standard_form
from core.traffic import action_means, arrival_vector, solve_traffic
from utils.logging_config import get_app_logger


# Nom de la variable d'utilisation
DELTA: Final[str] = "delta"


@dataclass(frozen=True, eq=False)
class TrafficLp:
    """LP de trafic sous forme matricielle (colonne 0 = delta)."""

    variable_keys: tuple[tuple[int, str], ...]
    """Actions (file, id) associées aux colonnes 1..m."""

    eq_matrix: np.ndarray
    """n lignes d'équilibre des flux."""

    eq_rhs: np.ndarray
    """alpha."""

    ub_matrix: np.ndarray
    """n lignes d'utilisation, sous la forme ub_matrix . v <= 0."""

    objective: np.ndarray
    """Coûts (1 sur delta, 0 ailleurs)."""

    mode: NumberMode = NumberMode.RATIONAL

    @property
    def num_variables(self) -> int:
        """1 + nombre d'actions."""
        return 1 + len(self.variable_keys)

    @property
    def n(self) -> int:
        """Nombre de files."""
        return self.eq_matrix.shape[0]

    def standard_form(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Ajoute une variable d'écart par ligne d'utilisation.

        Returns:
            Tuple (A, b, c) de min c.x sous A x = b, x >= 0
        """
        n: int = self.n
        slack: np.ndarray = zeros((2 * n, n), self.mode)
        for j in range(n):
            slack[n + j, j] = convert(1, self.mode)
        stacked: np.ndarray = np.concatenate([self.eq_matrix, self.ub_matrix], axis=0)
        a_std: np.ndarray = np.concatenate([stacked, slack], axis=1)
        b_std: np.ndarray = np.concatenate([self.eq_rhs, zeros(n, self.mode)])
        c_std: np.ndarray = np.concatenate([self.objective, zeros(n, self.mode)])
        return a_std, b_std, c_std


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Solution du LP de trafic."""

    status: LpStatus
    delta_star: Scalar | None
    lambda_bar: dict[tuple[int, str], Scalar]
    """Taux de tir optimaux par action (file, id)."""

    basis: tuple[int, ...]
    """Indices des variables de base (0 = delta, 1..m = actions, puis écarts)."""

    iterations: int = 0
    mode: NumberMode = NumberMode.RATIONAL

    @property
    def stabilizable(self) -> bool:
        """Optimum atteint avec delta* < 1 strictement."""
        return self.status is LpStatus.OPTIMAL and self.delta_star is not None and self.delta_star < 1

    def queue_totals(self, n: int) -> list[Scalar]:
        """Somme des lambda_xi par file."""
        totals: list[Scalar] = [convert(0, self.mode)] * n
        for (queue, _), value in self.lambda_bar.items():
            totals[queue] = totals[queue] + value
        return totals


def build_lp(net: Network, mode: NumberMode = NumberMode.RATIONAL) -> TrafficLp:
    """Construit le LP de trafic d'un réseau.

    Args:
        net: Réseau valide
        mode: Mode numérique

    Returns:
        TrafficLp avec 1 + |Sigma| variables, n égalités et n inégalités
    """
    keys: tuple[tuple[int, str], ...] = net.action_keys()
    means: dict[tuple[int, str], np.ndarray] = action_means(net, mode)
    width: int = 1 + len(keys)
    one: Scalar = convert(1, mode)

    eq_matrix: np.ndarray = zeros((net.n, width), mode)
    ub_matrix: np.ndarray = zeros((net.n, width), mode)
    for col, key in enumerate(keys, start=1):
        queue, _ = key
        for j in range(net.n):
            eq_matrix[j, col] = eq_matrix[j, col] - means[key][j]
        eq_matrix[queue, col] = eq_matrix[queue, col] + one
        ub_matrix[queue, col] = one / convert(net.queues[queue].rate, mode)  # type: ignore[arg-type]
    for j in range(net.n):
        ub_matrix[j, 0] = -one

    objective: np.ndarray = zeros(width, mode)
    objective[0] = one
    return TrafficLp(
        variable_keys=keys,
        eq_matrix=eq_matrix,
        eq_rhs=arrival_vector(net, mode),
        ub_matrix=ub_matrix,
        objective=objective,
        mode=mode,
    )


def solve_lp(lp: TrafficLp) -> LpSolution:
    """Résout le LP de trafic par le simplexe.

    Args:
        lp: LP construit par build_lp

    Returns:
        LpSolution (Optimal ou Infeasible; Unbounded est signalé comme anomalie)

    Raises:
        SimplexIterationError: Si le garde-fou d'itérations est atteint
    """
    logger = get_app_logger()
    a_std, b_std, c_std = lp.standard_form()
    result = solve_standard_form(a_std, b_std, c_std, lp.mode)

    if result.status is LpStatus.INFEASIBLE:
        logger.warning("LP de trafic infaisable: aucun taux de tir ne satisfait l'équilibre des flux")
        return LpSolution(LpStatus.INFEASIBLE, None, {}, result.basis, result.iterations, lp.mode)
    if result.status is LpStatus.UNBOUNDED or result.x is None:
        logger.error("LP de trafic non borné: anomalie (delta est borné par 0)")
        return LpSolution(LpStatus.UNBOUNDED, None, {}, result.basis, result.iterations, lp.mode)

    delta_star: Scalar = result.x[0]
    x: np.ndarray = result.x
    basis: tuple[int, ...] = result.basis
    iterations: int = result.iterations

    # Second passage: delta fixé à delta*, tir total minimal
    pinned: np.ndarray = zeros((1, a_std.shape[1]), lp.mode)
    pinned[0, 0] = convert(1, lp.mode)
    firing_cost: np.ndarray = zeros(a_std.shape[1], lp.mode)
    firing_cost[1 : lp.num_variables] = convert(1, lp.mode)
    refined = solve_standard_form(
        np.concatenate([a_std, pinned], axis=0),
        np.concatenate([b_std, np.array([delta_star], dtype=lp.mode.dtype)]),
        firing_cost,
        lp.mode,
    )
    iterations += refined.iterations
    if refined.status is LpStatus.OPTIMAL and refined.x is not None:
        x, basis = refined.x, refined.basis
    else:
        logger.warning(f"LP de trafic: second passage {refined.status.value}, premier optimum conservé")

    lambda_bar: dict[tuple[int, str], Scalar] = {
        key: x[col] for col, key in enumerate(lp.variable_keys, start=1)
    }
    logger.debug(f"LP de trafic: delta*={delta_star} en {iterations} itérations")
    return LpSolution(LpStatus.OPTIMAL, delta_star, lambda_bar, basis, iterations, lp.mode)


def is_stabilizable(net: Network, mode: NumberMode = NumberMode.RATIONAL) -> tuple[bool, LpSolution]:
    """Décide s'il existe un ordonnanceur ergodique (delta* < 1).

    Returns:
        Tuple (réponse, solution témoin)
    """
    solution: LpSolution = solve_lp(build_lp(net, mode))
    return solution.stabilizable, solution


def synthesize_scheduler(net: Network, sol: LpSolution, allow_unstable: bool = False) -> StaticScheduler:
    """Ordonnanceur statique P_xi = lambda_xi / somme_{zeta in Sigma_i} lambda_zeta.

    Une file de flux total nul reçoit l'action de repli avec probabilité 1.

    Args:
        net: Réseau du LP
        sol: Solution optimale
        allow_unstable: Autorise delta* >= 1 (simulation de diagnostic)

    Returns:
        StaticScheduler dont chaque distribution somme exactement à 1

    Raises:
        NetworkValidationError: Si la solution n'est pas optimale
        NotDeficientError: Si delta* >= 1 sans autorisation
    """
    if sol.status is not LpStatus.OPTIMAL:
        raise NetworkValidationError(f"Synthèse impossible: LP {sol.status.value}")
    if not sol.stabilizable and not allow_unstable:
        raise NotDeficientError(f"delta* = {sol.delta_star} >= 1: aucun ordonnanceur ergodique")

    distributions: list[dict[str, Fraction]] = []
    for i, queue in enumerate(net.queues):
        ids: list[str] = sorted(queue.action_ids)
        rates: list[Scalar] = [max(sol.lambda_bar.get((i, a), 0), 0) for a in ids]
        total: Scalar = sum(rates, convert(0, sol.mode))
        if is_zero(total, sol.mode):
            distributions.append({fallback_action(net, i): Fraction(1)})
            continue

        probabilities: dict[str, Fraction] = {}
        for action_id, rate in zip(ids, rates):
            probabilities[action_id] = Fraction(rate / total)
        # La plus grande probabilité absorbe l'arrondi pour une somme exacte
        last: str = max(ids, key=lambda a: probabilities[a])
        probabilities[last] = 1 - sum((p for a, p in probabilities.items() if a != last), Fraction(0))
        distributions.append(probabilities)

    return StaticScheduler.from_mappings(distributions)


@dataclass(frozen=True)
class DeterministicBound:
    """Meilleur ordonnanceur déterministe par énumération."""

    scheduler: StaticScheduler | None
    value: Scalar | None
    """max_i lambda_i / mu_i du meilleur choix (None si tous divergent)."""

    evaluated: tuple[tuple[StaticScheduler, Scalar | None], ...]
    """Tous les choix et leur valeur (None pour un réseau divergent)."""


def deterministic_bound(net: Network, mode: NumberMode = NumberMode.RATIONAL) -> DeterministicBound:
    """Énumère les ordonnanceurs déterministes et évalue max_i lambda_i / mu_i.

    Les files sans flux entrant sous un choix donné ont lambda_i = 0.
    """
    best: StaticScheduler | None = None
    best_value: Scalar | None = None
    evaluated: list[tuple[StaticScheduler, Scalar | None]] = []

    for scheduler in deterministic_schedulers(net):
        pure: Network = induce_pure_network(net, scheduler)
        try:
            traffic = solve_traffic(pure, mode, require_reachable=False)
        except DivergentError:
            evaluated.append((scheduler, None))
            continue
        value: Scalar = max(traffic.utilization)
        evaluated.append((scheduler, value))
        if best_value is None or value < best_value:
            best, best_value = scheduler, value

    return DeterministicBound(best, best_value, tuple(evaluated))


def lambda_vector(sol: LpSolution, keys: tuple[tuple[int, str], ...]) -> np.ndarray:
    """lambda_bar dans l'ordre des colonnes du LP."""
    return vector([sol.lambda_bar[key] for key in keys], sol.mode)
