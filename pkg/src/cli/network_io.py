"""Lecture et écriture des fichiers de description de réseau.

Format JSON:
- n, K: nombre de files et facteur de branchement
- arrival: {rate, production}
- queues: [{rate, actions: [{id, production, rate?}]}]
- production: [{offspring: [int, ...], prob: "p/q" | nombre}]

Ce module ne vérifie que la structure; la sémantique relève de validate.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from core.errors import NetworkFormatError, UnknownActionError
from core.network import Action, Network, ProductionEntry, ProductionFunction, Queue, StaticScheduler, fallback_action
from core.numeric import format_scalar, parse_rational
from utils.logging_config import get_app_logger


class NetworkFile:
    """Chargement des réseaux et des ordonnanceurs depuis le disque."""

    @classmethod
    def load(cls, file_path: str | Path) -> Network:
        """Charge un réseau depuis un fichier JSON.

        Args:
            file_path: Chemin vers le fichier

        Returns:
            Network (non validé)

        Raises:
            FileNotFoundError: Si le fichier n'existe pas
            NetworkFormatError: Si le JSON est illisible ou mal structuré
        """
        logger = get_app_logger()
        path: Path = Path(file_path)

        if not path.exists():
            raise FileNotFoundError(f"Fichier non trouvé: {path}")

        logger.debug(f"Lecture du réseau: {path}")
        data: Any = cls._read_json(path)
        return cls.parse(data, name=path.stem)

    @classmethod
    def _read_json(cls, path: Path) -> Any:
        """Lit un document JSON et convertit les erreurs de syntaxe."""
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            get_app_logger().error(f"JSON invalide dans {path}: {e.msg}")
            raise NetworkFormatError(f"JSON invalide: {e.msg}", line=e.lineno) from e
        except UnicodeDecodeError as e:
            raise NetworkFormatError(f"Encodage invalide: {e}") from e

    @classmethod
    def parse(cls, data: Any, name: str = "") -> Network:
        """Construit un réseau depuis un document JSON déjà décodé.

        Raises:
            NetworkFormatError: Si un champ manque ou a un type inattendu
        """
        root: dict[str, Any] = _expect(data, dict, "racine")
        n: int = _integer(_field(root, "n", ""), "n")
        k: int = _integer(_field(root, "K", ""), "K")

        arrival: dict[str, Any] = _expect(_field(root, "arrival", ""), dict, "arrival")
        arrival_rate: Fraction = _rational(_field(arrival, "rate", "arrival"), "arrival.rate")
        arrival_production: ProductionFunction = cls._parse_production(
            _field(arrival, "production", "arrival"), "arrival.production"
        )

        raw_queues: list[Any] = _expect(_field(root, "queues", ""), list, "queues")
        queues: list[Queue] = [
            cls._parse_queue(raw, f"queues[{i}]") for i, raw in enumerate(raw_queues)
        ]

        label: Any = root.get("name", name)
        return Network(
            n=n,
            K=k,
            arrival_rate=arrival_rate,
            arrival_production=arrival_production,
            queues=tuple(queues),
            name=str(label) if label is not None else name,
        )

    @classmethod
    def _parse_queue(cls, raw: Any, path: str) -> Queue:
        """Parse une file et ses actions."""
        queue: dict[str, Any] = _expect(raw, dict, path)
        rate: Fraction | None = None
        if queue.get("rate") is not None:
            rate = _rational(queue["rate"], f"{path}.rate")

        raw_actions: list[Any] = _expect(_field(queue, "actions", path), list, f"{path}.actions")
        actions: list[Action] = []
        for j, raw_action in enumerate(raw_actions):
            action_path: str = f"{path}.actions[{j}]"
            action: dict[str, Any] = _expect(raw_action, dict, action_path)
            action_id: Any = _field(action, "id", action_path)
            if not isinstance(action_id, (str, int)) or isinstance(action_id, bool):
                raise NetworkFormatError("Identifiant d'action invalide", field=f"{action_path}.id")
            action_rate: Fraction | None = None
            if action.get("rate") is not None:
                action_rate = _rational(action["rate"], f"{action_path}.rate")
            actions.append(Action(
                id=str(action_id),
                production=cls._parse_production(
                    _field(action, "production", action_path), f"{action_path}.production"
                ),
                rate=action_rate,
            ))
        return Queue(rate=rate, actions=tuple(actions))

    @classmethod
    def _parse_production(cls, raw: Any, path: str) -> ProductionFunction:
        """Parse une liste d'issues {offspring, prob}."""
        entries: list[ProductionEntry] = []
        for r, raw_entry in enumerate(_expect(raw, list, path)):
            entry_path: str = f"{path}[{r}]"
            entry: dict[str, Any] = _expect(raw_entry, dict, entry_path)
            offspring: list[Any] = _expect(_field(entry, "offspring", entry_path), list, f"{entry_path}.offspring")
            counts: tuple[int, ...] = tuple(
                _integer(count, f"{entry_path}.offspring[{c}]") for c, count in enumerate(offspring)
            )
            entries.append(ProductionEntry(counts, _rational(_field(entry, "prob", entry_path), f"{entry_path}.prob")))
        return ProductionFunction(tuple(entries))

    @classmethod
    def load_scheduler(cls, file_path: str | Path, net: Network) -> StaticScheduler:
        """Charge un ordonnanceur statique: {"1": {"a": "1/2", ...}, ...}.

        Les files absentes reçoivent leur action de repli.

        Raises:
            FileNotFoundError: Si le fichier n'existe pas
            NetworkFormatError: Si le document est mal formé
            UnknownActionError: Si une file ou une action est inconnue
        """
        path: Path = Path(file_path)
        if not path.exists():
            raise FileNotFoundError(f"Fichier non trouvé: {path}")
        data: dict[str, Any] = _expect(cls._read_json(path), dict, "racine")

        distributions: list[dict[str, Fraction]] = [
            {fallback_action(net, i): Fraction(1)} for i in range(net.n)
        ]
        for key, raw in data.items():
            try:
                queue: int = int(key) - 1
            except ValueError as e:
                raise NetworkFormatError(f"Numéro de file invalide {key!r}", field=key) from e
            if not 0 <= queue < net.n:
                raise UnknownActionError(f"File {key} absente du réseau (n={net.n})")
            mapping: dict[str, Any] = _expect(raw, dict, key)
            distributions[queue] = {
                str(action_id): _rational(prob, f"{key}.{action_id}") for action_id, prob in mapping.items()
            }
            known: tuple[str, ...] = net.queues[queue].action_ids
            for action_id in distributions[queue]:
                if action_id not in known:
                    raise UnknownActionError(f"Action inconnue {action_id!r} pour la file {key}")
            if sum(distributions[queue].values(), Fraction(0)) != 1:
                raise NetworkFormatError("La distribution ne somme pas à 1", field=key)
        return StaticScheduler.from_mappings(distributions)


def _field(container: dict[str, Any], key: str, path: str) -> Any:
    """Champ obligatoire."""
    if key not in container:
        location: str = f"{path}.{key}" if path else key
        raise NetworkFormatError("Champ obligatoire manquant", field=location)
    return container[key]


def _expect(value: Any, kind: type, path: str) -> Any:
    """Vérifie le type JSON d'une valeur."""
    if not isinstance(value, kind):
        raise NetworkFormatError(f"Type inattendu {type(value).__name__}, {kind.__name__} attendu", field=path)
    return value


def _integer(value: Any, path: str) -> int:
    """Entier JSON (les booléens sont refusés)."""
    if isinstance(value, bool) or not isinstance(value, int):
        raise NetworkFormatError(f"Entier attendu, {value!r} trouvé", field=path)
    return value


def _rational(value: Any, path: str) -> Fraction:
    """Rationnel "p/q" ou nombre JSON."""
    try:
        return parse_rational(value)
    except (ValueError, ZeroDivisionError) as e:
        raise NetworkFormatError(f"Nombre invalide {value!r}: {e}", field=path) from e


def production_to_list(production: ProductionFunction) -> list[dict[str, Any]]:
    """Sérialise une fonction de production."""
    return [
        {"offspring": list(entry.offspring), "prob": format_scalar(entry.prob)}
        for entry in production.entries
    ]


def network_to_dict(net: Network) -> dict[str, Any]:
    """Sérialise un réseau au format d'entrée."""
    queues: list[dict[str, Any]] = []
    for queue in net.queues:
        actions: list[dict[str, Any]] = []
        for action in queue.actions:
            item: dict[str, Any] = {"id": action.id, "production": production_to_list(action.production)}
            if action.rate is not None:
                item["rate"] = format_scalar(action.rate)
            actions.append(item)
        queues.append({
            "rate": format_scalar(queue.rate) if queue.rate is not None else None,
            "actions": actions,
        })
    return {
        "name": net.name,
        "n": net.n,
        "K": net.K,
        "arrival": {
            "rate": format_scalar(net.arrival_rate),
            "production": production_to_list(net.arrival_production),
        },
        "queues": queues,
    }


def scheduler_to_dict(sched: StaticScheduler) -> dict[str, dict[str, str | float]]:
    """Sérialise un ordonnanceur: {"1": {"a": "p/q"}} (files numérotées à partir de 1)."""
    return {
        str(i + 1): {action_id: format_scalar(prob) for action_id, prob in distribution}
        for i, distribution in enumerate(sched.distributions)
    }
