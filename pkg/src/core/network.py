"""Modèle des réseaux de files à branchement contrôlés.

Ce module définit:
- Les fonctions de production (offspring -> probabilité)
- Les actions, les files et le réseau complet
- Les ordonnanceurs statiques randomisés
- La validation, l'accessibilité, l'induction d'un réseau pur et
  l'uniformisation des taux par action

Les files sont indexées à partir de 0 en interne; les rapports et les
messages les numérotent à partir de 1.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

from core.errors import UniformizationOverflowError, UnknownActionError
from core.numeric import PROBABILITY_TOLERANCE, NumberMode, rational_bit_size
from utils.logging_config import get_app_logger


@dataclass(frozen=True)
class ProductionEntry:
    """Une issue d'une fonction de production."""

    offspring: tuple[int, ...]
    """Nombre de nouveaux jobs par file."""

    prob: Fraction
    """Probabilité de l'issue, dans (0, 1]."""

    @property
    def total(self) -> int:
        """Nombre total de jobs produits."""
        return sum(self.offspring)

    @property
    def is_empty(self) -> bool:
        """True pour la production vide (epsilon)."""
        return all(count == 0 for count in self.offspring)


@dataclass(frozen=True)
class ProductionFunction:
    """Distribution finie sur les vecteurs de production."""

    entries: tuple[ProductionEntry, ...]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Iterable[int], Fraction | int | str]]) -> ProductionFunction:
        """Construit une fonction de production à partir de couples (offspring, prob)."""
        return cls(tuple(
            ProductionEntry(tuple(int(c) for c in offspring), Fraction(prob))
            for offspring, prob in pairs
        ))

    @classmethod
    def point_mass(cls, offspring: Iterable[int]) -> ProductionFunction:
        """Production déterministe."""
        return cls((ProductionEntry(tuple(offspring), Fraction(1)),))

    @classmethod
    def mixture(cls, weighted: Iterable[tuple[Fraction, ProductionFunction]]) -> ProductionFunction:
        """Mélange convexe de fonctions de production.

        Les vecteurs identiques sont fusionnés en sommant leurs probabilités;
        les issues de poids nul disparaissent. L'ordre de première apparition
        est conservé.
        """
        merged: dict[tuple[int, ...], Fraction] = {}
        for weight, production in weighted:
            if weight == 0:
                continue
            for entry in production.entries:
                merged[entry.offspring] = merged.get(entry.offspring, Fraction(0)) + weight * entry.prob
        return cls(tuple(
            ProductionEntry(offspring, prob) for offspring, prob in merged.items() if prob != 0
        ))

    @property
    def total_probability(self) -> Fraction:
        """Somme des probabilités."""
        return sum((entry.prob for entry in self.entries), Fraction(0))

    def mean_offspring(self, n: int) -> tuple[Fraction, ...]:
        """Espérance du vecteur de production (ligne de la matrice A)."""
        means: list[Fraction] = [Fraction(0)] * n
        for entry in self.entries:
            for j, count in enumerate(entry.offspring[:n]):
                if count:
                    means[j] += entry.prob * count
        return tuple(means)

    def as_dict(self) -> dict[tuple[int, ...], Fraction]:
        """Vue dictionnaire offspring -> probabilité."""
        return {entry.offspring: entry.prob for entry in self.entries}


@dataclass(frozen=True)
class Action:
    """Action disponible pour une file."""

    id: str
    production: ProductionFunction
    rate: Fraction | None = None
    """Taux propre à l'action (variante étendue, consommée par uniformize)."""


@dataclass(frozen=True)
class Queue:
    """File d'attente: taux de service et actions disponibles."""

    rate: Fraction | None
    """Taux mu_i; None seulement si toutes les actions portent leur taux."""

    actions: tuple[Action, ...]

    @property
    def action_ids(self) -> tuple[str, ...]:
        """Identifiants des actions, dans l'ordre du fichier."""
        return tuple(action.id for action in self.actions)

    def action(self, action_id: str) -> Action:
        """Retourne une action par son identifiant.

        Raises:
            UnknownActionError: Si l'action n'existe pas
        """
        for action in self.actions:
            if action.id == action_id:
                return action
        raise UnknownActionError(f"Action inconnue: {action_id!r}")

    def sorted_actions(self) -> tuple[Action, ...]:
        """Actions triées par identifiant (ordre lexicographique)."""
        return tuple(sorted(self.actions, key=lambda a: a.id))


@dataclass(frozen=True)
class Network:
    """Réseau de files à branchement contrôlé."""

    n: int
    """Nombre de files."""

    K: int
    """Facteur de branchement (production totale maximale)."""

    arrival_rate: Fraction
    """Taux des arrivées externes mu_0."""

    arrival_production: ProductionFunction
    """Fonction de production des arrivées Prob_0."""

    queues: tuple[Queue, ...]

    name: str = ""
    """Nom du réseau (nom du fichier source), pour les rapports."""

    @property
    def is_pure(self) -> bool:
        """True si chaque file n'a qu'une action (réseau purement stochastique)."""
        return all(len(queue.actions) == 1 for queue in self.queues)

    @property
    def rates(self) -> tuple[Fraction, ...]:
        """Vecteur des taux mu."""
        return tuple(queue.rate if queue.rate is not None else Fraction(0) for queue in self.queues)

    @property
    def has_action_rates(self) -> bool:
        """True si au moins une action porte son propre taux."""
        return any(action.rate is not None for queue in self.queues for action in queue.actions)

    def action_keys(self) -> tuple[tuple[int, str], ...]:
        """Toutes les actions (file, id), triées par file puis par id."""
        return tuple(
            (i, action.id)
            for i, queue in enumerate(self.queues)
            for action in queue.sorted_actions()
        )

    def production(self, queue: int, action_id: str) -> ProductionFunction:
        """Fonction de production d'une action d'une file."""
        return self.queues[queue].action(action_id).production


@dataclass(frozen=True)
class StaticScheduler:
    """Ordonnanceur statique randomisé: une distribution fixe par file."""

    distributions: tuple[tuple[tuple[str, Fraction], ...], ...]
    """Par file, couples (id d'action, probabilité)."""

    @classmethod
    def from_mappings(cls, mappings: Iterable[Mapping[str, Fraction | int | str]]) -> StaticScheduler:
        """Construit un ordonnanceur depuis une liste de dictionnaires."""
        return cls(tuple(
            tuple((action_id, Fraction(prob)) for action_id, prob in sorted(mapping.items()))
            for mapping in mappings
        ))

    @classmethod
    def deterministic(cls, choices: Iterable[str]) -> StaticScheduler:
        """Ordonnanceur qui choisit toujours la même action par file."""
        return cls(tuple(((action_id, Fraction(1)),) for action_id in choices))

    def distribution(self, queue: int) -> dict[str, Fraction]:
        """Distribution d'une file sous forme de dictionnaire."""
        return dict(self.distributions[queue])

    def probability(self, queue: int, action_id: str) -> Fraction:
        """Probabilité P_xi d'une action."""
        return self.distribution(queue).get(action_id, Fraction(0))

    def support(self, queue: int) -> tuple[str, ...]:
        """Actions de probabilité non nulle."""
        return tuple(action_id for action_id, prob in self.distributions[queue] if prob > 0)


@dataclass(frozen=True)
class Violation:
    """Une violation d'invariant détectée par validate."""

    code: str
    """Identifiant stable de l'invariant violé."""

    location: str
    """Emplacement dans le réseau (ex: "queue 1 / action a")."""

    message: str


@dataclass(frozen=True)
class ValidationReport:
    """Résultat de la validation d'un réseau."""

    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        """True si aucune violation."""
        return not self.violations

    def codes(self) -> set[str]:
        """Ensemble des codes de violation."""
        return {violation.code for violation in self.violations}


def _production_violations(
    production: ProductionFunction,
    n: int,
    K: int,
    location: str,
    mode: NumberMode,
) -> list[Violation]:
    """Vérifie les invariants d'une fonction de production."""
    violations: list[Violation] = []
    seen: set[tuple[int, ...]] = set()

    if not production.entries:
        violations.append(Violation("empty_production", location, f"Production vide ({location})"))
        return violations

    for entry in production.entries:
        if len(entry.offspring) != n:
            violations.append(Violation(
                "offspring_length", location,
                f"Vecteur de production de longueur {len(entry.offspring)} au lieu de {n} ({location})"
            ))
            continue
        if any(count < 0 for count in entry.offspring):
            violations.append(Violation(
                "negative_offspring", location, f"Production négative {entry.offspring} ({location})"
            ))
        if entry.total > K:
            violations.append(Violation(
                "branching_factor", location,
                f"Production {entry.offspring} dépasse le facteur de branchement K={K} ({location})"
            ))
        if not (0 < entry.prob <= 1):
            violations.append(Violation(
                "probability_range", location,
                f"Probabilité {entry.prob} hors de (0, 1] ({location})"
            ))
        if entry.offspring in seen:
            violations.append(Violation(
                "duplicate_offspring", location, f"Production {entry.offspring} répétée ({location})"
            ))
        seen.add(entry.offspring)

    total: Fraction = production.total_probability
    balanced: bool = (
        total == 1 if mode.is_exact else abs(float(total) - 1.0) <= PROBABILITY_TOLERANCE
    )
    if not balanced:
        violations.append(Violation(
            "probability_sum", location,
            f"La somme des probabilités de production vaut {total} != 1 ({location})"
        ))
    return violations


def validate(net: Network, mode: NumberMode = NumberMode.RATIONAL) -> ValidationReport:
    """Valide les invariants de définition d'un réseau.

    Les violations sont retournées comme données; la fonction ne lève pas.
    Le rapport n'est ok que si toutes les files sont accessibles.

    Args:
        net: Réseau à valider
        mode: En mode flottant, la somme des probabilités est tolérée à 1e-12

    Returns:
        ValidationReport
    """
    violations: list[Violation] = []

    if net.n < 1:
        violations.append(Violation("queue_count", "network", f"Nombre de files n={net.n} < 1"))
    if net.K < 0:
        violations.append(Violation("branching_factor", "network", f"Facteur de branchement K={net.K} < 0"))
    if len(net.queues) != net.n:
        violations.append(Violation(
            "queue_count", "network", f"{len(net.queues)} files décrites pour n={net.n}"
        ))
    if not net.arrival_rate > 0:
        violations.append(Violation("nonpositive_rate", "arrival", f"Taux d'arrivée {net.arrival_rate} <= 0"))

    violations.extend(_production_violations(net.arrival_production, net.n, net.K, "arrival", mode))
    if not any(not entry.is_empty for entry in net.arrival_production.entries):
        violations.append(Violation(
            "zero_arrival_stream", "arrival", "Un flux d'arrivée non nul est requis"
        ))

    for i, queue in enumerate(net.queues):
        location: str = f"queue {i + 1}"
        if queue.rate is None:
            if not queue.actions or any(action.rate is None for action in queue.actions):
                violations.append(Violation("missing_rate", location, f"Taux manquant ({location})"))
        elif not queue.rate > 0:
            violations.append(Violation("nonpositive_rate", location, f"Taux {queue.rate} <= 0 ({location})"))
        if not queue.actions:
            violations.append(Violation("empty_actions", location, f"Aucune action ({location})"))

        ids: list[str] = [action.id for action in queue.actions]
        for duplicate in sorted({a for a in ids if ids.count(a) > 1}):
            violations.append(Violation(
                "duplicate_action", location, f"Action {duplicate!r} répétée ({location})"
            ))

        for action in queue.actions:
            action_location: str = f"{location} / action {action.id}"
            if action.rate is not None and not action.rate > 0:
                violations.append(Violation(
                    "nonpositive_rate", action_location, f"Taux {action.rate} <= 0 ({action_location})"
                ))
            violations.extend(_production_violations(action.production, net.n, net.K, action_location, mode))

    # L'accessibilité n'a de sens que sur une structure saine
    if not violations:
        reachable: set[int] = reachable_queues(net)
        for i in range(net.n):
            if i not in reachable:
                violations.append(Violation(
                    "unreachable_queue", f"queue {i + 1}", f"File {i + 1} inaccessible depuis les arrivées"
                ))

    if violations:
        get_app_logger().debug(f"Validation de {net.name or 'réseau'}: {len(violations)} violation(s)")
    return ValidationReport(tuple(violations))


def reachable_queues(net: Network) -> set[int]:
    """Files accessibles depuis le support de alpha.

    Parcours de graphe le long des arêtes {(i, j) : A_ij > 0}. Pour un réseau
    contrôlé, une arête existe dès qu'une action de i produit des j-jobs.

    Args:
        net: Réseau (pur ou contrôlé)

    Returns:
        Ensemble des indices de files accessibles (à partir de 0)
    """
    sources: set[int] = {
        j for entry in net.arrival_production.entries
        for j, count in enumerate(entry.offspring) if count > 0 and j < net.n
    }
    successors: list[set[int]] = [
        {
            j for action in queue.actions for entry in action.production.entries
            for j, count in enumerate(entry.offspring) if count > 0 and j < net.n
        }
        for queue in net.queues
    ]

    reached: set[int] = set(sources)
    frontier: deque[int] = deque(sorted(sources))
    while frontier:
        current: int = frontier.popleft()
        for nxt in successors[current]:
            if nxt not in reached:
                reached.add(nxt)
                frontier.append(nxt)
    return reached


def fallback_action(net: Network, queue: int) -> str:
    """Action retenue pour une file sans flux entrant: la première par ordre lexicographique."""
    return min(net.queues[queue].action_ids)


def _check_scheduler(net: Network, sched: StaticScheduler) -> None:
    """Vérifie que le support de l'ordonnanceur est dans les actions du réseau.

    Raises:
        UnknownActionError: Si une action est inconnue ou si le nombre de files diffère
    """
    if len(sched.distributions) != net.n:
        raise UnknownActionError(
            f"L'ordonnanceur décrit {len(sched.distributions)} files pour n={net.n}"
        )
    for i, distribution in enumerate(sched.distributions):
        known: tuple[str, ...] = net.queues[i].action_ids
        for action_id, _ in distribution:
            if action_id not in known:
                raise UnknownActionError(f"Action inconnue {action_id!r} pour la file {i + 1}")


def induce_pure_network(net: Network, sched: StaticScheduler) -> Network:
    """Réseau purement stochastique induit par un ordonnanceur statique.

    Prob'_i(r) = somme sur xi de P_xi * Prob_i(xi)(r), les vecteurs identiques
    étant fusionnés. Une file dont la distribution est vide reçoit l'action de
    repli (probabilité 1).

    Args:
        net: Réseau contrôlé
        sched: Ordonnanceur statique

    Returns:
        Réseau pur de même n, K, mu_0, mu_i et Prob_0

    Raises:
        UnknownActionError: Si l'ordonnanceur référence une action inconnue
    """
    _check_scheduler(net, sched)

    queues: list[Queue] = []
    for i, queue in enumerate(net.queues):
        distribution: dict[str, Fraction] = sched.distribution(i)
        if sum(distribution.values(), Fraction(0)) == 0:
            distribution = {fallback_action(net, i): Fraction(1)}

        mixed: ProductionFunction = ProductionFunction.mixture(
            (prob, queue.action(action_id).production)
            for action_id, prob in sorted(distribution.items())
        )
        label: str = "+".join(a for a, p in sorted(distribution.items()) if p > 0)
        queues.append(Queue(rate=queue.rate, actions=(Action(id=label, production=mixed),)))

    return replace(net, queues=tuple(queues))


def uniformize(net: Network, allow_k_increase: bool = False) -> Network:
    """Ramène les taux par action à un taux unique par file.

    mu_i devient le maximum des taux des actions de la file. Une action de
    taux mu_xi < mu_i tire sa production d'origine avec probabilité
    mu_xi/mu_i et remet un i-job dans la file (boucle e^(i)) sinon.

    Args:
        net: Réseau dont les actions peuvent porter leur propre taux
        allow_k_increase: Autorise K' = K + 1 si une boucle dépasse K

    Returns:
        Réseau sans taux par action

    Raises:
        UniformizationOverflowError: Si une boucle dépasse K sans autorisation
    """
    logger = get_app_logger()
    new_k: int = net.K
    queues: list[Queue] = []

    for i, queue in enumerate(net.queues):
        action_rates: list[Fraction] = [
            action.rate if action.rate is not None else queue.rate  # type: ignore[misc]
            for action in queue.actions
        ]
        top_rate: Fraction = max(action_rates)
        self_loop: tuple[int, ...] = tuple(1 if j == i else 0 for j in range(net.n))

        actions: list[Action] = []
        for action, rate in zip(queue.actions, action_rates):
            if rate == top_rate:
                actions.append(Action(id=action.id, production=action.production))
                continue
            if new_k < 1:
                if not allow_k_increase:
                    raise UniformizationOverflowError(
                        f"La boucle ajoutée à la file {i + 1} exige K' = {net.K + 1}"
                    )
                new_k = net.K + 1
            fire: Fraction = rate / top_rate
            production: ProductionFunction = ProductionFunction.mixture([
                (fire, action.production),
                (1 - fire, ProductionFunction.point_mass(self_loop)),
            ])
            actions.append(Action(id=action.id, production=production))

        queues.append(Queue(rate=top_rate, actions=tuple(actions)))

    if new_k != net.K:
        logger.warning(f"Uniformisation: facteur de branchement relevé de {net.K} à {new_k}")
    return replace(net, K=new_k, queues=tuple(queues))


def deterministic_schedulers(net: Network) -> Iterator[StaticScheduler]:
    """Énumère les ordonnanceurs déterministes (une action par file)."""
    choices: list[tuple[str, ...]] = [tuple(a.id for a in q.sorted_actions()) for q in net.queues]
    for combination in itertools.product(*choices):
        yield StaticScheduler.deterministic(combination)


def mix_schedulers(first: StaticScheduler, second: StaticScheduler, weight: Fraction) -> StaticScheduler:
    """Combinaison convexe weight * first + (1 - weight) * second."""
    mixed: list[dict[str, Fraction]] = []
    for dist_a, dist_b in zip(first.distributions, second.distributions):
        combined: dict[str, Fraction] = {}
        for action_id, prob in dist_a:
            combined[action_id] = combined.get(action_id, Fraction(0)) + weight * prob
        for action_id, prob in dist_b:
            combined[action_id] = combined.get(action_id, Fraction(0)) + (1 - weight) * prob
        mixed.append(combined)
    return StaticScheduler.from_mappings(mixed)


def network_size(net: Network) -> int:
    """Taille de description du réseau (rationnels codés en binaire)."""

    def production_size(production: ProductionFunction) -> int:
        return len(production.entries) + sum(rational_bit_size(e.prob) for e in production.entries)

    size: int = net.n + net.K
    size += rational_bit_size(net.arrival_rate)
    size += sum(rational_bit_size(rate) for rate in net.rates)
    size += production_size(net.arrival_production)
    for queue in net.queues:
        for action in queue.actions:
            size += production_size(action.production)
    return size
