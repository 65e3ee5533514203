"""Réseaux, stratégies hypothesis et ordonnanceurs de test.

random_controlled_network tire un réseau contrôlé à partir d'une graine:
n <= 3 files, <= 3 actions par file, K <= 2. Chaque production réserve
au moins 3/5 de masse à la production vide, donc la production moyenne
de chaque ligne reste <= 4/5 et A* existe pour tout ordonnanceur.

random_sparse_network tire un réseau pur jusqu'à 5 files dont les arrivées
ne touchent qu'une partie des files: certaines peuvent être inaccessibles.
"""

from __future__ import annotations

import random
from dataclasses import replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from core.network import Action, Network, ProductionFunction, Queue, StaticScheduler
from core.simulator import MemorylessPolicy


def production(pairs: Iterable[tuple[Sequence[int], Fraction | int | str]]) -> ProductionFunction:
    return ProductionFunction.from_pairs(pairs)


def empty(n: int) -> tuple[int, ...]:
    return (0,) * n


def unit(n: int, i: int) -> tuple[int, ...]:
    return tuple(1 if j == i else 0 for j in range(n))


def pure_network(
    arrival_rate: Fraction | int | str,
    arrival: Iterable[tuple[Sequence[int], Fraction | int | str]],
    queues: Sequence[tuple[Fraction | int | str, Iterable[tuple[Sequence[int], Fraction | int | str]]]],
    K: int,
    name: str = "",
) -> Network:
    """Réseau pur: une action "a" par file."""
    return Network(
        n=len(queues),
        K=K,
        arrival_rate=Fraction(arrival_rate),
        arrival_production=production(arrival),
        queues=tuple(
            Queue(rate=Fraction(rate), actions=(Action("a", production(pairs)),)) for rate, pairs in queues
        ),
        name=name,
    )


def single_queue(arrival_rate: Fraction | int | str, rate: Fraction | int | str) -> Network:
    """File M/M/1."""
    return pure_network(arrival_rate, [((1,), 1)], [(rate, [((0,), 1)])], K=1, name="mm1")


def _random_production(rng: random.Random, n: int, K: int) -> ProductionFunction:
    vectors: set[tuple[int, ...]] = set()
    for _ in range(rng.randint(1, 3)):
        total: int = rng.randint(1, K)
        counts: list[int] = [0] * n
        for _ in range(total):
            counts[rng.randrange(n)] += 1
        vectors.add(tuple(counts))
    ordered: list[tuple[int, ...]] = sorted(vectors)

    # Masse non vide <= 2/5, répartie en parts entières sur 10 * |vecteurs|
    denominator: int = 10 * len(ordered)
    budget: int = rng.randint(0, 4 * len(ordered))
    weights: list[int] = [0] * len(ordered)
    for _ in range(budget):
        weights[rng.randrange(len(ordered))] += 1
    pairs: list[tuple[tuple[int, ...], Fraction]] = [
        (vector, Fraction(w, denominator)) for vector, w in zip(ordered, weights) if w
    ]
    rest: Fraction = 1 - sum((p for _, p in pairs), Fraction(0))
    pairs.append((empty(n), rest))
    return ProductionFunction.from_pairs(pairs)


def random_controlled_network(seed: int, pure: bool = False) -> Network:
    """Réseau contrôlé aléatoire dont toutes les files reçoivent des arrivées externes."""
    rng: random.Random = random.Random(seed)
    n: int = rng.randint(1, 3)
    K: int = rng.randint(1, 2)

    arrival_weights: list[int] = [rng.randint(1, 4) for _ in range(n)]
    arrival: list[tuple[tuple[int, ...], Fraction]] = [
        (unit(n, i), Fraction(w, sum(arrival_weights))) for i, w in enumerate(arrival_weights)
    ]
    queues: list[Queue] = []
    for _ in range(n):
        count: int = 1 if pure else rng.randint(1, 3)
        actions: tuple[Action, ...] = tuple(
            Action(chr(ord("a") + k), _random_production(rng, n, K)) for k in range(count)
        )
        queues.append(Queue(rate=Fraction(rng.randint(1, 8), rng.randint(1, 4)), actions=actions))

    return Network(
        n=n,
        K=K,
        arrival_rate=Fraction(rng.randint(1, 6), rng.randint(1, 3)),
        arrival_production=ProductionFunction.from_pairs(arrival),
        queues=tuple(queues),
        name=f"random-{seed}",
    )


def random_sparse_network(seed: int) -> Network:
    """Réseau pur aléatoire (n <= 5) dont les arrivées visent un sous-ensemble des files."""
    rng: random.Random = random.Random(seed)
    n: int = rng.randint(1, 5)
    K: int = rng.randint(1, 2)
    targets: list[int] = sorted(rng.sample(range(n), rng.randint(1, n)))
    arrival: list[tuple[tuple[int, ...], Fraction]] = [(unit(n, i), Fraction(1, len(targets))) for i in targets]
    queues: tuple[Queue, ...] = tuple(
        Queue(rate=Fraction(rng.randint(1, 8)), actions=(Action("a", _random_production(rng, n, K)),))
        for _ in range(n)
    )
    return Network(
        n=n,
        K=K,
        arrival_rate=Fraction(rng.randint(1, 4)),
        arrival_production=ProductionFunction.from_pairs(arrival),
        queues=queues,
        name=f"sparse-{seed}",
    )


def with_action_rates(net: Network, rates: Sequence[Sequence[int]]) -> Network:
    """Variante étendue: chaque action porte son propre taux, la file n'en a plus."""
    return replace(net, queues=tuple(
        Queue(rate=None, actions=tuple(replace(action, rate=Fraction(r)) for action, r in zip(queue.actions, row)))
        for queue, row in zip(net.queues, rates)
    ))


def with_duplicate_action(net: Network, queue: int, action_id: str) -> Network:
    """Ajoute à une file une copie (id "z") d'une de ses actions."""
    target: Queue = net.queues[queue]
    copy: Action = replace(target.action(action_id), id="z")
    queues: list[Queue] = list(net.queues)
    queues[queue] = replace(target, actions=target.actions + (copy,))
    return replace(net, queues=tuple(queues))


def scaled_rates(net: Network, factor: Fraction) -> Network:
    """Multiplie mu_0 et tous les mu_i par factor."""
    return replace(
        net,
        arrival_rate=net.arrival_rate * factor,
        queues=tuple(replace(queue, rate=queue.rate * factor) for queue in net.queues),
    )


seeds = st.integers(min_value=0, max_value=2**32 - 1)
controlled_networks = seeds.map(random_controlled_network)
pure_networks = seeds.map(lambda seed: random_controlled_network(seed, pure=True))
sparse_networks = seeds.map(random_sparse_network)
weights = st.fractions(min_value=0, max_value=1, max_denominator=12)


def schedulers(net: Network, full_support: bool = False) -> st.SearchStrategy[StaticScheduler]:
    """Ordonnanceurs statiques à poids entiers; full_support interdit les poids nuls."""
    low: int = 1 if full_support else 0

    def queue_weights(queue: Queue) -> st.SearchStrategy[list[int]]:
        size: int = len(queue.actions)
        return st.lists(st.integers(low, 5), min_size=size, max_size=size).filter(lambda ws: sum(ws) > 0)

    def build(rows: tuple[list[int], ...]) -> StaticScheduler:
        return StaticScheduler.from_mappings(
            {action_id: Fraction(w, sum(ws)) for action_id, w in zip(queue.action_ids, ws)}
            for queue, ws in zip(net.queues, rows)
        )

    return st.tuples(*(queue_weights(queue) for queue in net.queues)).map(build)


def action_rates(net: Network) -> st.SearchStrategy[Network]:
    """Le réseau avec un taux entier dans [1, 6] par action."""
    rows = st.tuples(*(
        st.lists(st.integers(1, 6), min_size=len(q.actions), max_size=len(q.actions)) for q in net.queues
    ))
    return rows.map(lambda r: with_action_rates(net, r))


@st.composite
def subcritical_matrices(draw: st.DrawFn, max_size: int = 6) -> np.ndarray:
    """Matrice positive de norme ligne <= 0.9, donc de rayon spectral <= 0.9."""
    size: int = draw(st.integers(1, max_size))
    raw: np.ndarray = draw(arrays(np.float64, (size, size), elements=st.floats(0.0, 1.0)))
    scale: float = draw(st.floats(0.0, 0.9))
    return scale * raw / max(float(raw.sum(axis=1).max()), 1.0)


class ThresholdPolicy(MemorylessPolicy):
    """Bascule une file entre deux actions selon la longueur d'une file surveillée.

    L'action below est jouée tant que x[watched] < threshold, above ensuite;
    les autres files jouent leur action de repli.
    """

    def __init__(
        self,
        net: Network,
        queue: int,
        watched: int,
        threshold: int,
        below: str,
        above: str,
    ) -> None:
        self.queue: int = queue
        self.watched: int = watched
        self.threshold: int = threshold
        self.below: str = below
        self.above: str = above
        self.defaults: tuple[str, ...] = tuple(min(q.action_ids) for q in net.queues)
        super().__init__(self._rule)

    def _rule(self, state: tuple[int, ...]) -> list[dict[str, Fraction]]:
        choices: list[str] = list(self.defaults)
        choices[self.queue] = self.below if state[self.watched] < self.threshold else self.above
        return [{choice: Fraction(1)} for choice in choices]
