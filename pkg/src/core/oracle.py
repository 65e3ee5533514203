"""Loi stationnaire exacte d'une chaîne tronquée (oracle de vérification).

Les états sont {x : ||x|| <= B}. Une transition qui sortirait de cet
ensemble est supprimée (politique Reject): son taux est retiré de la ligne
sans être redirigé, ce qui laisse un générateur propre.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Final, Iterator, Mapping

import numpy as np
import scipy.linalg
import scipy.sparse

from core.errors import OracleError, SingularMatrixError
from core.network import Network, StaticScheduler, induce_pure_network
from core.numeric import NumberMode, Scalar, convert, solve, zeros
from utils.logging_config import get_app_logger


# Au-delà, le mode exact passe la main à l'itération de puissance flottante
EXACT_STATE_LIMIT: Final[int] = 2000

# Critère d'arrêt de l'itération de puissance (norme 1 entre deux itérés)
POWER_TOLERANCE: Final[float] = 1e-12

# Nombre maximal d'itérations de puissance
POWER_ITERATION_CAP: Final[int] = 2_000_000

# Masse de bord visée par auto_bound
TARGET_SHELL_MASS: Final[float] = 1e-6

# Nombre maximal d'états accepté par auto_bound
AUTO_STATE_CAP: Final[int] = 250_000


def lattice(n: int, bound: int) -> list[tuple[int, ...]]:
    """Points x de N^n avec ||x|| <= bound, par taille puis ordre lexicographique décroissant."""

    def compositions(length: int, total: int) -> Iterator[tuple[int, ...]]:
        if length == 1:
            yield (total,)
            return
        for head in range(total, -1, -1):
            for tail in compositions(length - 1, total - head):
                yield (head,) + tail

    return [point for total in range(bound + 1) for point in compositions(n, total)]


@dataclass(frozen=True, eq=False)
class TruncatedChain:
    """Chaîne de Markov finie sous forme de taux de transition."""

    bound: int
    states: tuple[tuple[int, ...], ...]
    index: dict[tuple[int, ...], int]
    rates: dict[tuple[int, int], Fraction]
    """Taux hors diagonale (origine, destination), tous > 0."""

    K: int = 0
    rejected: Fraction = Fraction(0)
    """Somme des taux supprimés au bord (diagnostic)."""

    @property
    def size(self) -> int:
        """Nombre d'états."""
        return len(self.states)

    @classmethod
    def from_transitions(
        cls,
        states: list[tuple[int, ...]],
        rates: Mapping[tuple[tuple[int, ...], tuple[int, ...]], Fraction | int | str],
    ) -> TruncatedChain:
        """Chaîne arbitraire donnée par ses états et ses taux (origine, destination) -> taux."""
        index: dict[tuple[int, ...], int] = {state: k for k, state in enumerate(states)}
        table: dict[tuple[int, int], Fraction] = {}
        for (origin, target), rate in rates.items():
            value: Fraction = Fraction(rate)
            if value > 0 and origin != target:
                key: tuple[int, int] = (index[origin], index[target])
                table[key] = table.get(key, Fraction(0)) + value
        return cls(
            bound=max((sum(s) for s in states), default=0),
            states=tuple(states),
            index=index,
            rates=table,
        )

    def generator(self, mode: NumberMode = NumberMode.RATIONAL) -> np.ndarray:
        """Générateur dense Q (lignes de somme nulle)."""
        q: np.ndarray = zeros((self.size, self.size), mode)
        for (origin, target), rate in self.rates.items():
            value: Scalar = convert(rate, mode)
            q[origin, target] = q[origin, target] + value
            q[origin, origin] = q[origin, origin] - value
        return q

    def sparse_generator(self) -> scipy.sparse.csr_matrix:
        """Générateur flottant creux."""
        rows: list[int] = []
        cols: list[int] = []
        data: list[float] = []
        exit_rates: np.ndarray = np.zeros(self.size)
        for (origin, target), rate in self.rates.items():
            rows.append(origin)
            cols.append(target)
            data.append(float(rate))
            exit_rates[origin] += float(rate)
        off: scipy.sparse.csr_matrix = scipy.sparse.csr_matrix(
            (data, (rows, cols)), shape=(self.size, self.size)
        )
        return (off - scipy.sparse.diags(exit_rates)).tocsr()

    def successors(self) -> list[set[int]]:
        """Listes d'adjacence de la chaîne."""
        adjacency: list[set[int]] = [set() for _ in range(self.size)]
        for origin, target in self.rates:
            adjacency[origin].add(target)
        return adjacency


def build_truncated(
    net: Network,
    bound: int,
    scheduler: StaticScheduler | None = None,
) -> TruncatedChain:
    """Chaîne tronquée d'un réseau pur (ou d'un réseau contrôlé sous un ordonnanceur statique).

    Args:
        net: Réseau pur, ou contrôlé avec scheduler
        bound: Borne B sur ||x||
        scheduler: Ordonnanceur statique pour un réseau contrôlé

    Returns:
        TruncatedChain

    Raises:
        OracleError: Si B < K ou si le réseau contrôlé n'a pas d'ordonnanceur
    """
    if scheduler is not None:
        net = induce_pure_network(net, scheduler)
    if not net.is_pure:
        raise OracleError("L'oracle exige un réseau pur ou un ordonnanceur statique")
    if bound < net.K:
        raise OracleError(f"Borne B={bound} inférieure au facteur de branchement K={net.K}")

    states: list[tuple[int, ...]] = lattice(net.n, bound)
    index: dict[tuple[int, ...], int] = {state: k for k, state in enumerate(states)}
    rates: dict[tuple[int, int], Fraction] = {}
    rejected: Fraction = Fraction(0)

    def emit(origin: int, base: tuple[int, ...], rate: Fraction, offspring: tuple[int, ...], prob: Fraction) -> None:
        nonlocal rejected
        target: tuple[int, ...] = tuple(b + c for b, c in zip(base, offspring))
        weight: Fraction = rate * prob
        if sum(target) > bound:
            rejected += weight
            return
        destination: int = index[target]
        if destination == origin:
            return
        key: tuple[int, int] = (origin, destination)
        rates[key] = rates.get(key, Fraction(0)) + weight

    for origin, state in enumerate(states):
        for entry in net.arrival_production.entries:
            emit(origin, state, net.arrival_rate, entry.offspring, entry.prob)
        for i, queue in enumerate(net.queues):
            if not state[i]:
                continue
            base: tuple[int, ...] = tuple(v - 1 if j == i else v for j, v in enumerate(state))
            for entry in queue.actions[0].production.entries:
                emit(origin, base, queue.rate, entry.offspring, entry.prob)  # type: ignore[arg-type]

    return TruncatedChain(
        bound=bound,
        states=tuple(states),
        index=index,
        rates=rates,
        K=net.K,
        rejected=rejected,
    )


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    """Loi stationnaire sur les états d'une chaîne tronquée."""

    states: tuple[tuple[int, ...], ...]
    probabilities: np.ndarray
    mode: NumberMode = NumberMode.RATIONAL

    def as_dict(self) -> dict[tuple[int, ...], Scalar]:
        """Vue état -> probabilité (états de probabilité nulle exclus)."""
        return {s: p for s, p in zip(self.states, self.probabilities) if p != 0}

    def probability(self, state: tuple[int, ...]) -> Scalar:
        """pi(x)."""
        for s, p in zip(self.states, self.probabilities):
            if s == state:
                return p
        return convert(0, self.mode)

    def joint_busy(self, queues: tuple[int, ...]) -> Scalar:
        """Probabilité que toutes les files données soient non vides."""
        return sum(
            (p for s, p in zip(self.states, self.probabilities) if all(s[i] > 0 for i in queues)),
            convert(0, self.mode),
        )

    def marginal_busy(self, queue: int) -> Scalar:
        """Probabilité que la file soit non vide."""
        return self.joint_busy((queue,))

    def utilization(self) -> list[Scalar]:
        """Vecteur des probabilités d'occupation par file."""
        n: int = len(self.states[0]) if self.states else 0
        return [self.marginal_busy(i) for i in range(n)]


def recurrent_class(tc: TruncatedChain, origin: int = 0) -> list[int]:
    """États accessibles depuis origin et qui y reviennent (ordre des états)."""
    forward: list[set[int]] = tc.successors()
    backward: list[set[int]] = [set() for _ in range(tc.size)]
    for source, targets in enumerate(forward):
        for target in targets:
            backward[target].add(source)

    def closure(adjacency: list[set[int]]) -> set[int]:
        seen: set[int] = {origin}
        frontier: deque[int] = deque([origin])
        while frontier:
            current: int = frontier.popleft()
            for nxt in adjacency[current]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    forward_set: set[int] = closure(forward)
    return sorted(forward_set & closure(backward))


def _power_iteration(generator: scipy.sparse.csr_matrix) -> np.ndarray:
    """pi P = pi pour le noyau uniformisé P = I + Q / Lambda."""
    logger = get_app_logger()
    size: int = generator.shape[0]
    uniform_rate: float = float(np.max(-generator.diagonal())) * 1.05 or 1.0
    kernel: scipy.sparse.csr_matrix = (
        scipy.sparse.identity(size, format="csr") + generator / uniform_rate
    ).tocsr()
    kernel_t: scipy.sparse.csr_matrix = kernel.T.tocsr()
    pi: np.ndarray = np.full(size, 1.0 / size)
    for iteration in range(POWER_ITERATION_CAP):
        nxt: np.ndarray = kernel_t @ pi
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < POWER_TOLERANCE:
            logger.debug(f"Itération de puissance: convergence en {iteration + 1} itérations")
            return nxt
        pi = nxt
    logger.warning(f"Itération de puissance: plafond de {POWER_ITERATION_CAP} itérations atteint")
    return pi


def stationary(tc: TruncatedChain, mode: NumberMode = NumberMode.RATIONAL) -> StationaryDistribution:
    """Résout pi Q = 0, somme pi = 1 sur la classe récurrente de 0.

    Mode rationnel: élimination exacte jusqu'à EXACT_STATE_LIMIT états, puis
    itération de puissance flottante. Mode flottant: scipy.linalg.solve
    jusqu'à la limite, itération de puissance au-delà.

    Raises:
        OracleError: Si le système est singulier sur la classe récurrente
    """
    logger = get_app_logger()
    members: list[int] = recurrent_class(tc)
    if len(members) < tc.size:
        logger.warning(
            f"Chaîne réductible: restriction à la classe de 0 ({len(members)}/{tc.size} états)"
        )

    size: int = len(members)
    position: dict[int, int] = {k: pos for pos, k in enumerate(members)}
    sub: TruncatedChain = TruncatedChain(
        bound=tc.bound,
        states=tuple(tc.states[k] for k in members),
        index={tc.states[k]: pos for pos, k in enumerate(members)},
        rates={
            (position[o], position[t]): r
            for (o, t), r in tc.rates.items()
            if o in position and t in position
        },
        K=tc.K,
    )

    effective: NumberMode = mode
    if size > EXACT_STATE_LIMIT:
        effective = NumberMode.FLOAT
        if mode.is_exact:
            logger.warning(f"{size} états: passage en flottant (itération de puissance)")
        values: np.ndarray = _power_iteration(sub.sparse_generator())
    else:
        # Q^T pi^T = 0 avec la dernière équation remplacée par la normalisation
        system: np.ndarray = sub.generator(mode).T.copy()
        rhs: np.ndarray = zeros(size, mode)
        system[size - 1, :] = convert(1, mode)
        rhs[size - 1] = convert(1, mode)
        try:
            if mode.is_exact:
                values = solve(system, rhs, mode)
            else:
                values = scipy.linalg.solve(system, rhs)
        except (SingularMatrixError, np.linalg.LinAlgError) as e:
            logger.error(f"Système stationnaire singulier: {e}")
            raise OracleError("Système stationnaire singulier sur la classe de 0") from e

    probabilities: np.ndarray = zeros(tc.size, effective)
    for pos, k in enumerate(members):
        probabilities[k] = values[pos]
    return StationaryDistribution(states=tc.states, probabilities=probabilities, mode=effective)


def truncation_mass(tc: TruncatedChain, pi: StationaryDistribution) -> Scalar:
    """Masse stationnaire sur la couche ||x|| in {B - K + 1, ..., B}."""
    threshold: int = tc.bound - tc.K + 1
    return sum(
        (p for s, p in zip(pi.states, pi.probabilities) if sum(s) >= threshold),
        convert(0, pi.mode),
    )


@dataclass(frozen=True, eq=False)
class OracleResult:
    """Chaîne, loi stationnaire et masse de bord retenues."""

    bound: int
    chain: TruncatedChain
    distribution: StationaryDistribution
    shell_mass: float


def solve_bounded(
    net: Network,
    bound: int,
    mode: NumberMode = NumberMode.FLOAT,
    scheduler: StaticScheduler | None = None,
) -> OracleResult:
    """Construit et résout la chaîne tronquée pour une borne donnée."""
    chain: TruncatedChain = build_truncated(net, bound, scheduler)
    distribution: StationaryDistribution = stationary(chain, mode)
    mass: float = float(truncation_mass(chain, distribution))
    return OracleResult(bound, chain, distribution, mass)


def auto_bound(
    net: Network,
    mode: NumberMode = NumberMode.FLOAT,
    scheduler: StaticScheduler | None = None,
    target: float = TARGET_SHELL_MASS,
    state_cap: int = AUTO_STATE_CAP,
) -> OracleResult:
    """Plus petite borne (par doublement depuis 4K) dont la masse de bord est <= target.

    Raises:
        OracleError: Si le nombre d'états dépasse state_cap avant d'atteindre la cible
    """
    logger = get_app_logger()
    bound: int = max(4 * net.K, 1)
    while True:
        states: int = math.comb(bound + net.n, net.n)
        if states > state_cap:
            raise OracleError(
                f"Borne automatique introuvable: {states} états pour B={bound} (plafond {state_cap})"
            )
        result: OracleResult = solve_bounded(net, bound, mode, scheduler)
        logger.debug(f"Oracle B={bound}: {states} états, masse de bord {result.shell_mass:.3g}")
        if result.shell_mass <= target:
            return result
        bound *= 2


def total_variation(
    distribution: StationaryDistribution,
    occupancy: Mapping[tuple[int, ...], float],
) -> float:
    """Distance en variation totale entre la loi de l'oracle et une occupation empirique."""
    exact: dict[tuple[int, ...], float] = {s: float(p) for s, p in distribution.as_dict().items()}
    keys: set[tuple[int, ...]] = set(exact) | set(occupancy)
    return 0.5 * sum(abs(exact.get(k, 0.0) - float(occupancy.get(k, 0.0))) for k in keys)
