"""Simplexe primal en deux phases, exact ou flottant.

Problème traité: min c.x sous A x = b, x >= 0. La règle de Bland (plus
petit indice entrant, plus petit indice de base sortant à égalité) évite le
cyclage; un plafond d'itérations 10 * (lignes + colonnes)^2 sert de
garde-fou.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Final

import numpy as np

from core.errors import SimplexIterationError
from core.numeric import NumberMode, Scalar, as_mode, convert, zeros
from utils.logging_config import get_app_logger


# Tolérance des tests de signe en mode flottant
SIMPLEX_TOLERANCE: Final[float] = 1e-9


class LpStatus(str, Enum):
    """Issue d'une résolution."""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class SimplexResult:
    """Résultat brut du simplexe."""

    status: LpStatus
    x: np.ndarray | None
    objective: Scalar | None
    basis: tuple[int, ...]
    """Variables de base finales (indices de colonnes de A)."""

    iterations: int


class _Tableau:
    """Tableau canonique B^-1 [A | b] et sa base."""

    def __init__(self, rows: np.ndarray, rhs: np.ndarray, basis: list[int], mode: NumberMode) -> None:
        self.rows: np.ndarray = rows
        self.rhs: np.ndarray = rhs
        self.basis: list[int] = basis
        self.mode: NumberMode = mode
        self.tolerance: Scalar = 0 if mode.is_exact else SIMPLEX_TOLERANCE
        self.iterations: int = 0

    def pivot(self, row: int, col: int) -> None:
        """Fait entrer la colonne col dans la base à la ligne row."""
        pivot: Scalar = self.rows[row, col]
        self.rows[row] = self.rows[row] / pivot
        self.rhs[row] = self.rhs[row] / pivot
        for other in range(self.rows.shape[0]):
            if other == row:
                continue
            factor: Scalar = self.rows[other, col]
            if factor == 0:
                continue
            self.rows[other] = self.rows[other] - factor * self.rows[row]
            self.rhs[other] = self.rhs[other] - factor * self.rhs[row]
            self.rows[other, col] = convert(0, self.mode)
        self.basis[row] = col

    def run(self, cost: np.ndarray, columns: range, max_iterations: int) -> LpStatus:
        """Itère jusqu'à l'optimum (ou la détection d'un problème non borné)."""
        while True:
            basic_cost: np.ndarray = cost[self.basis]
            entering: int | None = None
            for col in columns:
                reduced: Scalar = cost[col] - basic_cost @ self.rows[:, col]
                if reduced < -self.tolerance:
                    entering = col
                    break
            if entering is None:
                return LpStatus.OPTIMAL

            candidates: list[tuple[Scalar, int, int]] = [
                (self.rhs[r] / self.rows[r, entering], self.basis[r], r)
                for r in range(self.rows.shape[0])
                if self.rows[r, entering] > self.tolerance
            ]
            if not candidates:
                return LpStatus.UNBOUNDED
            _, _, leaving = min(candidates)

            self.pivot(leaving, entering)
            self.iterations += 1
            if self.iterations > max_iterations:
                raise SimplexIterationError(
                    f"Plafond de {max_iterations} itérations dépassé (cyclage probable)"
                )

    def drop_row(self, row: int) -> None:
        """Supprime une contrainte redondante."""
        self.rows = np.delete(self.rows, row, axis=0)
        self.rhs = np.delete(self.rhs, row)
        del self.basis[row]


def solve_standard_form(
    a_eq: np.ndarray,
    b_eq: np.ndarray,
    cost: np.ndarray,
    mode: NumberMode = NumberMode.RATIONAL,
) -> SimplexResult:
    """Résout min cost.x sous a_eq x = b_eq, x >= 0.

    Args:
        a_eq: Matrice des contraintes (m x k)
        b_eq: Second membre (m)
        cost: Coûts (k)
        mode: Mode numérique

    Returns:
        SimplexResult (x et objectif seulement si optimal)

    Raises:
        SimplexIterationError: Si le garde-fou d'itérations est atteint
    """
    logger = get_app_logger()
    m, k = a_eq.shape
    rows: np.ndarray = as_mode(a_eq, mode)
    rhs: np.ndarray = as_mode(b_eq, mode)
    costs: np.ndarray = as_mode(cost, mode)

    # Second membre positif
    for r in range(m):
        if rhs[r] < 0:
            rows[r] = -rows[r]
            rhs[r] = -rhs[r]

    max_iterations: int = 10 * (m + k) ** 2
    one: Scalar = convert(1, mode)

    # Phase 1: une variable artificielle par ligne
    artificial: np.ndarray = zeros((m, m), mode)
    for r in range(m):
        artificial[r, r] = one
    tableau: _Tableau = _Tableau(
        np.concatenate([rows, artificial], axis=1), rhs, list(range(k, k + m)), mode
    )
    phase_one_cost: np.ndarray = np.concatenate([zeros(k, mode), np.array([one] * m, dtype=mode.dtype)])
    tableau.run(phase_one_cost, range(k + m), max_iterations)

    infeasibility: Scalar = phase_one_cost[tableau.basis] @ tableau.rhs
    if infeasibility > tableau.tolerance:
        logger.debug(f"Simplexe: phase 1 terminée avec infaisabilité {infeasibility}")
        return SimplexResult(LpStatus.INFEASIBLE, None, None, tuple(tableau.basis), tableau.iterations)

    # Chasser les artificielles restées en base (à niveau nul)
    row: int = 0
    while row < len(tableau.basis):
        if tableau.basis[row] >= k:
            replacement: int | None = next(
                (col for col in range(k) if abs(tableau.rows[row, col]) > tableau.tolerance), None
            )
            if replacement is None:
                tableau.drop_row(row)
                continue
            tableau.pivot(row, replacement)
        row += 1

    # Phase 2 sur les colonnes d'origine
    tableau.rows = tableau.rows[:, :k]
    status: LpStatus = tableau.run(costs, range(k), max_iterations)
    if status is LpStatus.UNBOUNDED:
        return SimplexResult(status, None, None, tuple(tableau.basis), tableau.iterations)

    x: np.ndarray = zeros(k, mode)
    for r, col in enumerate(tableau.basis):
        x[col] = tableau.rhs[r]
    objective: Scalar = costs @ x
    return SimplexResult(LpStatus.OPTIMAL, x, objective, tuple(tableau.basis), tableau.iterations)
