"""Exceptions du domaine des réseaux de files à branchement.

Les violations de validation sont des données (ValidationReport) et ne
passent pas par ce module; les exceptions signalent une analyse qui ne peut
pas continuer.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from core.network import ValidationReport


class BranchNetError(Exception):
    """Racine des erreurs de l'outil."""


class NetworkFormatError(BranchNetError):
    """Fichier de description illisible ou mal formé."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None) -> None:
        self.field: str | None = field
        self.line: int | None = line
        location: str = ""
        if field is not None:
            location = f" (champ {field})"
        elif line is not None:
            location = f" (ligne {line})"
        super().__init__(f"{message}{location}")


class NetworkValidationError(BranchNetError):
    """Réseau sémantiquement invalide pour l'opération demandée."""

    def __init__(self, message: str, report: ValidationReport | None = None) -> None:
        self.report: ValidationReport | None = report
        super().__init__(message)


class UnknownActionError(BranchNetError):
    """Un ordonnanceur référence une action absente du réseau."""


class UniformizationOverflowError(BranchNetError):
    """Les boucles ajoutées par l'uniformisation dépassent le facteur K."""


class SingularMatrixError(BranchNetError, ArithmeticError):
    """Matrice non inversible (pivot nul ou sous le seuil)."""


class DivergentError(BranchNetError, ArithmeticError):
    """La série A* = I + A + A^2 + ... ne converge pas."""


class NotDeficientError(BranchNetError):
    """La solution du trafic n'est pas strictement sous les taux de service."""

    def __init__(self, message: str, queues: tuple[int, ...] = ()) -> None:
        self.queues: tuple[int, ...] = queues
        super().__init__(message)


class CertificationFailedError(BranchNetError):
    """Une marge de dérive dépasse -gamma."""

    def __init__(self, support: frozenset[int], index: int, margin: Any, certificate: Any = None) -> None:
        self.support: frozenset[int] = support
        self.index: int = index
        self.margin: Any = margin
        self.certificate: Any = certificate
        queues: list[int] = sorted(i + 1 for i in support)
        super().__init__(
            f"Dérive non certifiée: support {queues}, file {index + 1}, marge {margin}"
        )


class SimplexIterationError(BranchNetError):
    """Le garde-fou d'itérations du simplexe a été atteint (cyclage)."""


class BudgetExceededBeforeFirstReturnError(BranchNetError):
    """Budget de simulation épuisé avant le premier retour à l'état vide."""

    def __init__(self, message: str, trace: tuple[tuple[float, int], ...] = (), clock: float = 0.0,
                 events: int = 0) -> None:
        self.trace: tuple[tuple[float, int], ...] = trace
        self.clock: float = clock
        self.events: int = events
        super().__init__(message)


class OracleError(BranchNetError):
    """Chaîne tronquée inutilisable (borne trop petite, masse de bord trop grande)."""
