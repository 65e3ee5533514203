"""Simulation événementielle du CTMDP d'un réseau à branchement contrôlé.

Sémantique: à chaque époque, course entre les arrivées (taux mu_0) et les
files non vides (taux mu_i). Le temps de séjour suit une loi exponentielle
de taux total, tirée par inversion (-ln(1 - u) / taux); le gagnant est
choisi proportionnellement aux taux. L'action d'une file n'est tirée que
lorsqu'elle gagne la course.

Générateur: numpy PCG64 initialisé par SeedSequence(seed, spawn_key=(replica,)).
Les uniformes sont tirés par blocs; la suite consommée ne dépend que de
(seed, replica).

Les statistiques sont collectées par cycles de régénération (retours à
l'état vide); un cycle interrompu par le budget n'est pas comptabilisé.
"""

from __future__ import annotations

import bisect
import math
from abc import ABC, abstractmethod
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Final, Mapping, Sequence

import numpy as np

from core.errors import BudgetExceededBeforeFirstReturnError, UnknownActionError
from core.network import Network, ProductionFunction, StaticScheduler
from core.numeric import NumberMode
from core.statistics import TailFit, fit_tail, half_width, ratio_estimate
from core.traffic import action_means, arrival_vector
from utils.logging_config import get_app_logger


# Identifiant du gagnant pour une arrivée externe
ARRIVAL: Final[int] = -1

# Taille des blocs d'uniformes
UNIFORM_BLOCK: Final[int] = 4096

# Seuil d'élagage de la carte d'occupation
OCCUPANCY_PRUNE: Final[float] = 1e-12

# Nombre maximal de points de la trace (t, ||x||)
TRACE_CAP: Final[int] = 10000

# Intervalle initial de la trace, en temps simulé
TRACE_INTERVAL: Final[float] = 1.0

# Nombre de lots par défaut
DEFAULT_BATCHES: Final[int] = 30


@dataclass(frozen=True)
class SimState:
    """État du CTMDP: tailles des files et horloge."""

    queues: tuple[int, ...]
    clock: float = 0.0

    @classmethod
    def empty(cls, n: int) -> SimState:
        """État initial 0."""
        return cls(queues=(0,) * n)

    @property
    def total(self) -> int:
        """Nombre total de jobs ||x||."""
        return sum(self.queues)


@dataclass(frozen=True)
class EventRecord:
    """Trace d'une transition."""

    time: float
    """Instant de la transition."""

    winner: int
    """File gagnante (à partir de 0) ou ARRIVAL."""

    action: str | None
    """Action tirée (None pour une arrivée)."""

    offspring: tuple[int, ...]


class PolicyKind(str, Enum):
    """Classe d'ordonnanceur."""

    STATIC = "static"
    MEMORYLESS = "memoryless"
    PATH_DEPENDENT = "path_dependent"


class SchedulerPolicy(ABC):
    """Ordonnanceur fournissant une distribution d'actions par file."""

    kind: PolicyKind

    @property
    def window(self) -> int | None:
        """Longueur d'historique transmise (0: aucune, None: historique complet)."""
        return 0

    @abstractmethod
    def distribution(
        self,
        queue: int,
        state: tuple[int, ...],
        history: Sequence[EventRecord],
    ) -> Mapping[str, Fraction | float]:
        """Distribution des actions de la file queue."""


class StaticPolicy(SchedulerPolicy):
    """Distribution fixe par file."""

    kind = PolicyKind.STATIC

    def __init__(self, scheduler: StaticScheduler) -> None:
        self.scheduler: StaticScheduler = scheduler

    def distribution(
        self,
        queue: int,
        state: tuple[int, ...],
        history: Sequence[EventRecord],
    ) -> Mapping[str, Fraction | float]:
        return self.scheduler.distribution(queue)


class MemorylessPolicy(SchedulerPolicy):
    """Distribution fonction de l'état courant seulement."""

    kind = PolicyKind.MEMORYLESS

    def __init__(self, rule: Callable[[tuple[int, ...]], Sequence[Mapping[str, Fraction | float]]]) -> None:
        self.rule = rule

    def distribution(
        self,
        queue: int,
        state: tuple[int, ...],
        history: Sequence[EventRecord],
    ) -> Mapping[str, Fraction | float]:
        return self.rule(state)[queue]


class PathDependentPolicy(SchedulerPolicy):
    """Distribution fonction des derniers événements et de l'état courant.

    window=None transmet l'historique complet (mémoire non bornée).
    """

    kind = PolicyKind.PATH_DEPENDENT

    def __init__(
        self,
        rule: Callable[[Sequence[EventRecord], tuple[int, ...]], Sequence[Mapping[str, Fraction | float]]],
        window: int | None = 16,
    ) -> None:
        self.rule = rule
        self._window: int | None = window

    @property
    def window(self) -> int | None:
        return self._window

    def distribution(
        self,
        queue: int,
        state: tuple[int, ...],
        history: Sequence[EventRecord],
    ) -> Mapping[str, Fraction | float]:
        return self.rule(history, state)[queue]


class UniformStream:
    """Flux d'uniformes [0, 1) tirés par blocs d'un PCG64."""

    def __init__(self, seed: int, replica: int = 0, block: int = UNIFORM_BLOCK) -> None:
        sequence: np.random.SeedSequence = np.random.SeedSequence(seed, spawn_key=(replica,))
        self.generator: np.random.Generator = np.random.Generator(np.random.PCG64(sequence))
        self.block: int = block
        self._buffer: list[float] = []
        self._position: int = 0

    def next(self) -> float:
        """Uniforme suivante."""
        if self._position >= len(self._buffer):
            self._buffer = self.generator.random(self.block).tolist()
            self._position = 0
        value: float = self._buffer[self._position]
        self._position += 1
        return value


@dataclass(frozen=True)
class _Table:
    """Fonction de production compilée pour le tirage."""

    offspring: tuple[tuple[int, ...], ...]
    cumulative: tuple[float, ...]

    @classmethod
    def compile(cls, production: ProductionFunction) -> _Table:
        offspring: list[tuple[int, ...]] = []
        cumulative: list[float] = []
        running: Fraction = Fraction(0)
        for entry in production.entries:
            running += entry.prob
            offspring.append(entry.offspring)
            cumulative.append(float(running))
        return cls(tuple(offspring), tuple(cumulative))

    def draw(self, u: float) -> int:
        return min(bisect.bisect_right(self.cumulative, u * self.cumulative[-1]), len(self.offspring) - 1)


def _choice_table(distribution: Mapping[str, Fraction | float]) -> tuple[tuple[str, ...], tuple[float, ...]]:
    """Actions de probabilité non nulle (ordre des ids) et probabilités cumulées."""
    ids: list[str] = []
    cumulative: list[float] = []
    running: float = 0.0
    for action_id in sorted(distribution):
        prob: float = float(distribution[action_id])
        if prob <= 0:
            continue
        running += prob
        ids.append(action_id)
        cumulative.append(running)
    return tuple(ids), tuple(cumulative)


class SimulationEngine:
    """Moteur de transitions d'un réseau sous un ordonnanceur donné."""

    def __init__(self, net: Network, policy: SchedulerPolicy) -> None:
        self.net: Network = net
        self.policy: SchedulerPolicy = policy
        self.n: int = net.n
        self.arrival_rate: float = float(net.arrival_rate)
        self.rates: tuple[float, ...] = tuple(float(r) for r in net.rates)
        self.arrival_table: _Table = _Table.compile(net.arrival_production)
        self.tables: list[dict[str, _Table]] = [
            {action.id: _Table.compile(action.production) for action in queue.actions}
            for queue in net.queues
        ]
        self.keys: tuple[tuple[int, str], ...] = net.action_keys()
        self.key_index: dict[tuple[int, str], int] = {key: k for k, key in enumerate(self.keys)}

        self._static_choices: list[tuple[tuple[str, ...], tuple[float, ...]]] | None = None
        if isinstance(policy, StaticPolicy):
            self._static_choices = [
                _choice_table(policy.distribution(i, (0,) * self.n, ())) for i in range(self.n)
            ]
            for i, (ids, _) in enumerate(self._static_choices):
                self._check_ids(i, ids)

        window: int | None = policy.window
        self.history: deque[EventRecord] | None = (
            None if window == 0 else deque(maxlen=window)
        )

    def _check_ids(self, queue: int, ids: Sequence[str]) -> None:
        if not ids:
            raise UnknownActionError(f"Distribution vide pour la file {queue + 1}")
        for action_id in ids:
            if action_id not in self.tables[queue]:
                raise UnknownActionError(f"Action inconnue {action_id!r} pour la file {queue + 1}")

    def choose(self, queue: int, state: tuple[int, ...], u: float) -> str:
        """Tire l'action de la file gagnante."""
        if self._static_choices is not None:
            ids, cumulative = self._static_choices[queue]
        else:
            ids, cumulative = _choice_table(
                self.policy.distribution(queue, state, tuple(self.history) if self.history is not None else ())
            )
            self._check_ids(queue, ids)
        if len(ids) == 1:
            return ids[0]
        position: int = bisect.bisect_right(cumulative, u * cumulative[-1])
        return ids[min(position, len(ids) - 1)]

    def advance(self, x: list[int], stream: UniformStream) -> tuple[float, int, str | None, tuple[int, ...]]:
        """Applique une transition à x (modifié en place).

        Returns:
            Tuple (durée de séjour, gagnant, action, production)
        """
        total: float = self.arrival_rate
        for i in range(self.n):
            if x[i]:
                total += self.rates[i]

        sojourn: float = -math.log(1.0 - stream.next()) / total
        target: float = stream.next() * total

        winner: int = ARRIVAL
        running: float = self.arrival_rate
        if target >= running:
            for i in range(self.n):
                if x[i]:
                    running += self.rates[i]
                    winner = i
                    if target < running:
                        break

        action: str | None = None
        if winner == ARRIVAL:
            table: _Table = self.arrival_table
        else:
            state: tuple[int, ...] = tuple(x)
            needs_draw: bool = self._static_choices is None or len(self._static_choices[winner][0]) > 1
            action = self.choose(winner, state, stream.next() if needs_draw else 0.0)
            table = self.tables[winner][action]
            x[winner] -= 1

        offspring: tuple[int, ...] = (
            table.offspring[table.draw(stream.next())] if len(table.offspring) > 1 else table.offspring[0]
        )
        for j, count in enumerate(offspring):
            if count:
                x[j] += count
        return sojourn, winner, action, offspring


def step(
    net: Network,
    policy: SchedulerPolicy,
    state: SimState,
    rng: UniformStream,
    engine: SimulationEngine | None = None,
) -> tuple[SimState, EventRecord]:
    """Une transition du CTMDP depuis state.

    L'historique d'un ordonnanceur dépendant du chemin vit dans le moteur:
    les appels successifs doivent partager le même engine.

    Args:
        net: Réseau simulé
        policy: Ordonnanceur
        state: État courant
        rng: Flux d'uniformes
        engine: Moteur déjà compilé (obligatoire si policy dépend du chemin)

    Returns:
        Tuple (état suivant, enregistrement de l'événement)

    Raises:
        ValueError: Si policy dépend du chemin et qu'aucun moteur n'est fourni
    """
    if engine is None:
        if policy.kind is PolicyKind.PATH_DEPENDENT:
            raise ValueError("Un ordonnanceur dépendant du chemin exige un SimulationEngine partagé")
        engine = SimulationEngine(net, policy)
    x: list[int] = list(state.queues)
    sojourn, winner, action, offspring = engine.advance(x, rng)
    clock: float = state.clock + sojourn
    record: EventRecord = EventRecord(clock, winner, action, offspring)
    if engine.history is not None:
        engine.history.append(record)
    return SimState(tuple(x), clock), record


@dataclass(eq=False)
class CycleLog:
    """Données brutes d'une réplique: une ligne par cycle complet."""

    n: int
    keys: tuple[tuple[int, str], ...]
    lengths: list[float] = field(default_factory=list)
    busy: list[list[float]] = field(default_factory=list)
    firings: list[list[int]] = field(default_factory=list)
    arrivals: list[int] = field(default_factory=list)
    occupancy: dict[tuple[int, ...], float] = field(default_factory=dict)
    sizes: dict[int, float] = field(default_factory=dict)
    trace: list[tuple[float, int]] = field(default_factory=list)
    clock: float = 0.0
    events: int = 0


class _Trace:
    """Trace (t, ||x||) échantillonnée; l'intervalle double au-delà de TRACE_CAP points."""

    def __init__(self) -> None:
        self.points: list[tuple[float, int]] = [(0.0, 0)]
        self.interval: float = TRACE_INTERVAL
        self.next_mark: float = TRACE_INTERVAL

    def observe(self, clock: float, size: int) -> None:
        while clock >= self.next_mark:
            self.points.append((self.next_mark, size))
            self.next_mark += self.interval
            if len(self.points) > TRACE_CAP:
                self.points = self.points[::2]
                self.interval *= 2
                self.next_mark = self.points[-1][0] + self.interval


def simulate_replica(
    net: Network,
    policy: SchedulerPolicy,
    seed: int,
    cycle_budget: int,
    time_budget: float = math.inf,
    replica: int = 0,
) -> CycleLog:
    """Simule une réplique et retourne ses données par cycle.

    Raises:
        BudgetExceededBeforeFirstReturnError: Si aucun cycle n'est complet
    """
    engine: SimulationEngine = SimulationEngine(net, policy)
    stream: UniformStream = UniformStream(seed, replica)
    n: int = net.n
    log: CycleLog = CycleLog(n=n, keys=engine.keys)
    trace: _Trace = _Trace()

    x: list[int] = [0] * n
    size: int = 0
    clock: float = 0.0
    events: int = 0

    cycle_start: float = 0.0
    cycle_busy: list[float] = [0.0] * n
    cycle_firings: list[int] = [0] * len(engine.keys)
    cycle_arrivals: int = 0
    cycle_occupancy: dict[tuple[int, ...], float] = {}
    cycle_sizes: dict[int, float] = {}

    while len(log.lengths) < cycle_budget:
        state: tuple[int, ...] = tuple(x)
        sojourn, winner, action, offspring = engine.advance(x, stream)
        if clock + sojourn > time_budget:
            clock = time_budget
            trace.observe(clock, size)
            break

        # Temps passé dans l'état quitté
        cycle_occupancy[state] = cycle_occupancy.get(state, 0.0) + sojourn
        cycle_sizes[size] = cycle_sizes.get(size, 0.0) + sojourn
        for i in range(n):
            if state[i]:
                cycle_busy[i] += sojourn

        clock += sojourn
        events += 1
        if winner == ARRIVAL:
            cycle_arrivals += 1
        else:
            cycle_firings[engine.key_index[(winner, action)]] += 1  # type: ignore[index]
        if engine.history is not None:
            engine.history.append(EventRecord(clock, winner, action, offspring))

        trace.observe(clock, size)
        size = sum(x)

        if size == 0:
            log.lengths.append(clock - cycle_start)
            log.busy.append(cycle_busy)
            log.firings.append(cycle_firings)
            log.arrivals.append(cycle_arrivals)
            for key, value in cycle_occupancy.items():
                log.occupancy[key] = log.occupancy.get(key, 0.0) + value
            for key, value in cycle_sizes.items():
                log.sizes[key] = log.sizes.get(key, 0.0) + value
            cycle_start = clock
            cycle_busy = [0.0] * n
            cycle_firings = [0] * len(engine.keys)
            cycle_arrivals = 0
            cycle_occupancy = {}
            cycle_sizes = {}

    log.trace = trace.points
    log.clock = clock
    log.events = events

    if not log.lengths:
        get_app_logger().warning(
            f"Budget épuisé avant le premier retour à 0 (t={clock:.6g}, {events} événements, ||x||={size})"
        )
        raise BudgetExceededBeforeFirstReturnError(
            f"Aucun retour à l'état vide avant la fin du budget (t={clock:.6g}, ||x||={size})",
            trace=tuple(log.trace),
            clock=clock,
            events=events,
        )
    return log


@dataclass(frozen=True, eq=False)
class SimReport:
    """Statistiques de régénération fusionnées."""

    cycles: int
    total_time: float
    events: int
    mean_return_time: float
    return_time_hw: float
    action_keys: tuple[tuple[int, str], ...]
    firing_freq: np.ndarray
    """Tirs par unité de temps, dans l'ordre de action_keys."""

    firing_hw: np.ndarray
    arrival_freq: float
    utilization: np.ndarray
    utilization_hw: np.ndarray
    occupancy: dict[tuple[int, ...], float]
    """Fraction du temps par état (états sous OCCUPANCY_PRUNE élagués)."""

    size_histogram: np.ndarray
    """Fraction du temps par taille totale ||x||."""

    tail: TailFit
    batch_time: np.ndarray
    batch_busy: np.ndarray
    batch_firings: np.ndarray
    batch_arrivals: np.ndarray
    trace: tuple[tuple[float, int], ...]
    seed: int
    replicas: int

    @property
    def batches(self) -> int:
        """Nombre de lots effectifs."""
        return len(self.batch_time)

    def firing(self, queue: int, action_id: str) -> float:
        """Fréquence O_xi d'une action."""
        return float(self.firing_freq[self.action_keys.index((queue, action_id))])

    def occupancy_mass(self) -> float:
        """Somme des fractions d'occupation conservées."""
        return float(sum(self.occupancy.values()))


def summarize(logs: Sequence[CycleLog], batches: int = DEFAULT_BATCHES, seed: int = 0) -> SimReport:
    """Fusionne les répliques (dans l'ordre) et calcule les estimateurs par lots."""
    first: CycleLog = logs[0]
    n: int = first.n
    lengths: np.ndarray = np.array([v for log in logs for v in log.lengths], dtype=float)
    busy: np.ndarray = np.array([v for log in logs for v in log.busy], dtype=float).reshape(-1, n)
    firings: np.ndarray = np.array(
        [v for log in logs for v in log.firings], dtype=float
    ).reshape(-1, len(first.keys))
    arrivals: np.ndarray = np.array([v for log in logs for v in log.arrivals], dtype=float)

    groups: int = max(1, min(batches, len(lengths)))
    chunks: list[np.ndarray] = np.array_split(np.arange(len(lengths)), groups)
    batch_time: np.ndarray = np.array([lengths[c].sum() for c in chunks])
    batch_busy: np.ndarray = np.array([busy[c].sum(axis=0) for c in chunks]).reshape(groups, n)
    batch_firings: np.ndarray = np.array([firings[c].sum(axis=0) for c in chunks]).reshape(groups, -1)
    batch_arrivals: np.ndarray = np.array([arrivals[c].sum() for c in chunks])
    batch_cycles: np.ndarray = np.array([len(c) for c in chunks], dtype=float)

    total_time: float = float(lengths.sum())
    utilization, utilization_hw = ratio_estimate(batch_busy, batch_time)
    firing_freq, firing_hw = ratio_estimate(batch_firings, batch_time)
    return_time, return_hw = ratio_estimate(batch_time.reshape(-1, 1), batch_cycles)

    occupancy: dict[tuple[int, ...], float] = {}
    sizes: dict[int, float] = {}
    for log in logs:
        for key, value in log.occupancy.items():
            occupancy[key] = occupancy.get(key, 0.0) + value
        for key, value in log.sizes.items():
            sizes[key] = sizes.get(key, 0.0) + value
    occupancy = {
        key: value / total_time for key, value in sorted(occupancy.items())
        if value / total_time >= OCCUPANCY_PRUNE
    }
    histogram: np.ndarray = np.zeros(max(sizes) + 1 if sizes else 1)
    for key, value in sizes.items():
        histogram[key] = value / total_time

    return SimReport(
        cycles=len(lengths),
        total_time=total_time,
        events=sum(log.events for log in logs),
        mean_return_time=float(return_time[0]),
        return_time_hw=float(return_hw[0]),
        action_keys=first.keys,
        firing_freq=firing_freq,
        firing_hw=firing_hw,
        arrival_freq=float(arrivals.sum() / total_time),
        utilization=utilization,
        utilization_hw=utilization_hw,
        occupancy=occupancy,
        size_histogram=histogram,
        tail=fit_tail(histogram),
        batch_time=batch_time,
        batch_busy=batch_busy,
        batch_firings=batch_firings,
        batch_arrivals=batch_arrivals,
        trace=tuple(first.trace),
        seed=seed,
        replicas=len(logs),
    )


def run_cycles(
    net: Network,
    policy: SchedulerPolicy,
    seed: int,
    cycle_budget: int,
    time_budget: float = math.inf,
    replica: int = 0,
    batches: int = DEFAULT_BATCHES,
) -> SimReport:
    """Simule jusqu'à cycle_budget retours à 0 ou la fin du temps simulé.

    Args:
        net: Réseau (pur ou contrôlé)
        policy: Ordonnanceur
        seed: Graine
        cycle_budget: Nombre de cycles de régénération visé
        time_budget: Temps simulé maximal
        replica: Indice de réplique (flux aléatoire dérivé)
        batches: Nombre de lots pour les demi-largeurs

    Returns:
        SimReport

    Raises:
        BudgetExceededBeforeFirstReturnError: Si aucun retour à 0 n'a eu lieu
    """
    log: CycleLog = simulate_replica(net, policy, seed, cycle_budget, time_budget, replica)
    return summarize([log], batches, seed)


def run_replicas(
    net: Network,
    policy: SchedulerPolicy,
    seed: int,
    cycle_budget: int,
    time_budget: float = math.inf,
    replicas: int = 1,
    workers: int = 1,
    batches: int = DEFAULT_BATCHES,
) -> SimReport:
    """Simule plusieurs répliques indépendantes et fusionne par indice de réplique.

    Chaque réplique reçoit cycle_budget cycles et le même budget de temps.
    Avec workers > 1, les répliques tournent dans un pool de processus
    (l'ordonnanceur doit alors être sérialisable).
    """
    logger = get_app_logger()
    logger.debug(f"Simulation: {replicas} réplique(s), {workers} processus, graine {seed}")
    arguments = [(net, policy, seed, cycle_budget, time_budget, r) for r in range(replicas)]

    if workers > 1 and replicas > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(simulate_replica, *args) for args in arguments]
            logs: list[CycleLog] = [future.result() for future in futures]
    else:
        logs = [simulate_replica(*args) for args in arguments]
    return summarize(logs, batches, seed)


@dataclass(frozen=True)
class ExponentialMoment:
    """Estimation de E[exp(delta ||x||)] sous la loi stationnaire."""

    delta: float
    value: float
    diverged: bool


def estimate_exponential_moment(report: SimReport, delta: float) -> ExponentialMoment:
    """Somme observée de exp(delta k) h_k plus l'extrapolation géométrique de la queue.

    Le résultat est normalisé par la masse observée plus la queue extrapolée
    (valeur 1 pour delta = 0). Diverge si delta >= taux de décroissance ajusté.
    """
    tail: TailFit = report.tail
    if delta == 0:
        return ExponentialMoment(0.0, 1.0, False)
    if delta >= tail.rate:
        return ExponentialMoment(delta, math.inf, True)
    sizes: np.ndarray = np.arange(len(report.size_histogram), dtype=float)
    observed: float = float(np.sum(report.size_histogram * np.exp(delta * sizes)))
    mass: float = float(np.sum(report.size_histogram))
    value: float = (observed + tail.tail_sum(delta)) / (mass + tail.tail_sum(0.0))
    return ExponentialMoment(delta, value, False)


@dataclass(frozen=True, eq=False)
class IdentityCheck:
    """Résidus par file et demi-largeurs par lots."""

    residuals: np.ndarray
    half_widths: np.ndarray

    def within(self, factor: float = 3.0, floor: float = 1e-12) -> bool:
        """True si chaque |résidu| <= factor * demi-largeur (+ floor)."""
        return bool(np.all(np.abs(self.residuals) <= factor * self.half_widths + floor))


def _per_batch(report: SimReport, values: Callable[[np.ndarray, np.ndarray, float], np.ndarray]) -> IdentityCheck:
    point: np.ndarray = values(
        report.batch_firings.sum(axis=0) / report.total_time,
        report.batch_busy.sum(axis=0) / report.total_time,
        float(report.batch_arrivals.sum() / report.total_time),
    )
    per_batch: np.ndarray = np.array([
        values(firings / time, busy / time, arrivals / time)
        for firings, busy, arrivals, time in zip(
            report.batch_firings, report.batch_busy, report.batch_arrivals, report.batch_time
        )
    ])
    return IdentityCheck(point, half_width(per_batch))


def flow_balance(report: SimReport, net: Network) -> IdentityCheck:
    """Résidus somme_{xi in Sigma_j} O_xi - O_0 m0_j - somme_zeta O_zeta A_zeta_j.

    O_0 est la fréquence empirique des arrivées et m0 la production moyenne
    des arrivées.
    """
    means: dict[tuple[int, str], np.ndarray] = action_means(net, NumberMode.FLOAT)
    production: np.ndarray = np.array([means[key] for key in report.action_keys]).reshape(-1, net.n)
    arrival_mean: np.ndarray = arrival_vector(net, NumberMode.FLOAT) / float(net.arrival_rate)
    owners: np.ndarray = np.zeros((len(report.action_keys), net.n))
    for k, (queue, _) in enumerate(report.action_keys):
        owners[k, queue] = 1.0

    def residual(freq: np.ndarray, busy: np.ndarray, arrivals: float) -> np.ndarray:
        return freq @ owners - arrivals * arrival_mean - freq @ production

    return _per_batch(report, residual)


def utilization_identity(report: SimReport, net: Network) -> IdentityCheck:
    """Résidus rho_i - somme_{xi in Sigma_i} O_xi / mu_i."""
    mu: np.ndarray = np.array([float(r) for r in net.rates])
    owners: np.ndarray = np.zeros((len(report.action_keys), net.n))
    for k, (queue, _) in enumerate(report.action_keys):
        owners[k, queue] = 1.0

    def residual(freq: np.ndarray, busy: np.ndarray, arrivals: float) -> np.ndarray:
        return busy - (freq @ owners) / mu

    return _per_batch(report, residual)


def jump_distribution(
    net: Network,
    policy: SchedulerPolicy,
    state: tuple[int, ...],
    samples: int,
    seed: int,
) -> dict[tuple[int, ...], int]:
    """Comptes empiriques des successeurs d'un état fixé."""
    engine: SimulationEngine = SimulationEngine(net, policy)
    stream: UniformStream = UniformStream(seed)
    counts: dict[tuple[int, ...], int] = {}
    for _ in range(samples):
        x: list[int] = list(state)
        engine.advance(x, stream)
        successor: tuple[int, ...] = tuple(x)
        counts[successor] = counts.get(successor, 0) + 1
    return counts


def expected_jump_distribution(
    net: Network,
    policy: SchedulerPolicy,
    state: tuple[int, ...],
) -> dict[tuple[int, ...], Fraction]:
    """Loi exacte du successeur: q(x, sigma, y) / taux total."""
    active: list[int] = [i for i in range(net.n) if state[i]]
    total: Fraction = net.arrival_rate + sum((net.queues[i].rate for i in active), Fraction(0))  # type: ignore[misc]
    law: dict[tuple[int, ...], Fraction] = {}

    def add(base: tuple[int, ...], weight: Fraction, production: ProductionFunction) -> None:
        for entry in production.entries:
            successor: tuple[int, ...] = tuple(b + c for b, c in zip(base, entry.offspring))
            law[successor] = law.get(successor, Fraction(0)) + weight * entry.prob

    add(state, net.arrival_rate / total, net.arrival_production)
    for i in active:
        base: tuple[int, ...] = tuple(v - 1 if j == i else v for j, v in enumerate(state))
        weight: Fraction = net.queues[i].rate / total  # type: ignore[operator]
        for action_id, prob in policy.distribution(i, state, ()).items():
            if prob:
                add(base, weight * Fraction(prob), net.production(i, action_id))
    return law
