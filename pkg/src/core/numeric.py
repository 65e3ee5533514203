"""Couche numérique: arithmétique exacte (Fraction) ou flottante (binary64).

Les modules d'analyse manipulent des tableaux numpy dont le dtype dépend du
mode: ``object`` contenant des ``Fraction`` en mode rationnel, ``float64`` en
mode flottant. Les mêmes routines servent donc les deux modes.
"""

from __future__ import annotations

from enum import Enum
from fractions import Fraction
from typing import Final, Iterable, Union

import numpy as np

from core.errors import SingularMatrixError


Scalar = Union[Fraction, float]

# Seuil de pivot en mode flottant (en dessous: matrice déclarée singulière)
PIVOT_THRESHOLD: Final[float] = 1e-12

# Tolérance sur la somme des probabilités en mode flottant
PROBABILITY_TOLERANCE: Final[float] = 1e-12

# Tolérance générale des comparaisons en mode flottant
FLOAT_TOLERANCE: Final[float] = 1e-12


class NumberMode(str, Enum):
    """Mode de représentation des nombres."""

    RATIONAL = "rational"
    FLOAT = "float"

    @property
    def dtype(self) -> type:
        """dtype numpy associé au mode."""
        return object if self is NumberMode.RATIONAL else np.float64

    @property
    def is_exact(self) -> bool:
        """True en mode rationnel."""
        return self is NumberMode.RATIONAL


def parse_rational(raw: object) -> Fraction:
    """Convertit une valeur de fichier en Fraction exacte.

    Accepte les chaînes "p/q", les entiers et les flottants (convertis via
    leur représentation décimale la plus courte, donc 0.2 donne 1/5).

    Args:
        raw: Valeur lue dans le JSON

    Returns:
        Fraction correspondante

    Raises:
        ValueError: Si la valeur n'est pas un nombre fini
        ZeroDivisionError: Si le dénominateur est nul
    """
    if isinstance(raw, bool):
        raise ValueError(f"Booléen inattendu: {raw}")
    if isinstance(raw, int):
        return Fraction(raw)
    if isinstance(raw, float):
        if not np.isfinite(raw):
            raise ValueError(f"Nombre non fini: {raw}")
        return Fraction(repr(raw))
    if isinstance(raw, str):
        text: str = raw.strip()
        if "/" in text:
            num_str, _, den_str = text.partition("/")
            return Fraction(int(num_str.strip()), int(den_str.strip()))
        return Fraction(text)
    raise ValueError(f"Type numérique inattendu: {type(raw).__name__}")


def convert(value: Scalar | int, mode: NumberMode) -> Scalar:
    """Convertit un scalaire dans le mode demandé."""
    if mode.is_exact:
        return value if isinstance(value, Fraction) else Fraction(value)
    return float(value)


def vector(values: Iterable[Scalar | int], mode: NumberMode) -> np.ndarray:
    """Construit un vecteur numpy dans le mode demandé."""
    return np.array([convert(v, mode) for v in values], dtype=mode.dtype)


def matrix(rows: Iterable[Iterable[Scalar | int]], mode: NumberMode) -> np.ndarray:
    """Construit une matrice numpy dans le mode demandé."""
    data: list[list[Scalar]] = [[convert(v, mode) for v in row] for row in rows]
    result: np.ndarray = np.empty((len(data), len(data[0]) if data else 0), dtype=mode.dtype)
    for i, row in enumerate(data):
        for j, value in enumerate(row):
            result[i, j] = value
    return result


def zeros(shape: int | tuple[int, ...], mode: NumberMode) -> np.ndarray:
    """Tableau de zéros dans le mode demandé."""
    if mode.is_exact:
        return np.full(shape, Fraction(0), dtype=object)
    return np.zeros(shape, dtype=np.float64)


def identity(size: int, mode: NumberMode) -> np.ndarray:
    """Matrice identité dans le mode demandé."""
    result: np.ndarray = zeros((size, size), mode)
    for i in range(size):
        result[i, i] = convert(1, mode)
    return result


def as_mode(array: np.ndarray, mode: NumberMode) -> np.ndarray:
    """Copie un tableau en convertissant ses éléments dans le mode demandé."""
    if mode.is_exact:
        result: np.ndarray = np.empty(array.shape, dtype=object)
        for index, value in np.ndenumerate(array):
            result[index] = convert(value, mode)
        return result
    return np.array(array, dtype=np.float64)


def is_zero(value: Scalar, mode: NumberMode, tolerance: float = FLOAT_TOLERANCE) -> bool:
    """Teste la nullité (exacte ou à tolérance près)."""
    if mode.is_exact:
        return value == 0
    return abs(float(value)) <= tolerance


def invert(square: np.ndarray, mode: NumberMode) -> np.ndarray:
    """Inverse une matrice par élimination de Gauss-Jordan.

    Pivot partiel (plus grande valeur absolue de la colonne); en mode
    flottant, un pivot de module inférieur à PIVOT_THRESHOLD déclare la
    matrice singulière.

    Args:
        square: Matrice carrée
        mode: Mode numérique

    Returns:
        Inverse de la matrice

    Raises:
        SingularMatrixError: Si la matrice n'est pas inversible
    """
    size: int = square.shape[0]
    work: np.ndarray = np.concatenate([as_mode(square, mode), identity(size, mode)], axis=1)
    _eliminate(work, size, mode)
    return work[:, size:]


def solve(square: np.ndarray, rhs: np.ndarray, mode: NumberMode) -> np.ndarray:
    """Résout le système ``square @ x = rhs`` par élimination de Gauss.

    Raises:
        SingularMatrixError: Si la matrice n'est pas inversible
    """
    size: int = square.shape[0]
    column: np.ndarray = as_mode(rhs, mode).reshape(size, 1)
    work: np.ndarray = np.concatenate([as_mode(square, mode), column], axis=1)
    _eliminate(work, size, mode)
    return work[:, size]


def _eliminate(work: np.ndarray, size: int, mode: NumberMode) -> None:
    """Réduit en place les ``size`` premières colonnes de ``work`` à l'identité."""
    for col in range(size):
        pivot_row: int = max(range(col, size), key=lambda r: abs(work[r, col]))
        pivot: Scalar = work[pivot_row, col]
        if is_zero(pivot, mode, PIVOT_THRESHOLD):
            raise SingularMatrixError(f"Pivot nul en colonne {col}")
        if pivot_row != col:
            work[[col, pivot_row]] = work[[pivot_row, col]]

        # Seules les colonnes non nulles de la ligne pivot comptent
        nonzero: np.ndarray = np.flatnonzero(work[col] != 0)
        work[col, nonzero] = work[col, nonzero] / pivot

        for row in range(work.shape[0]):
            if row == col:
                continue
            factor: Scalar = work[row, col]
            if factor == 0:
                continue
            work[row, nonzero] = work[row, nonzero] - factor * work[col, nonzero]


def all_less(left: np.ndarray, right: np.ndarray) -> bool:
    """Comparaison stricte composante par composante."""
    return all(bool(a < b) for a, b in zip(left, right))


def all_nonnegative(array: np.ndarray, mode: NumberMode) -> bool:
    """True si toutes les entrées sont >= 0 (à tolérance près en flottant)."""
    threshold: Scalar = 0 if mode.is_exact else -FLOAT_TOLERANCE
    return all(bool(value >= threshold) for value in np.ravel(array))


def max_abs(array: np.ndarray) -> Scalar:
    """Norme infinie d'un tableau (0 pour un tableau vide)."""
    values: list[Scalar] = [abs(v) for v in np.ravel(array)]
    return max(values) if values else 0


def format_scalar(value: Scalar | int) -> str | float:
    """Sérialise un scalaire: "p/q" pour une Fraction, nombre pour un flottant."""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (int, np.integer)):
        return f"{int(value)}/1"
    return float(value)


def format_vector(values: Iterable[Scalar]) -> list[str | float]:
    """Sérialise un vecteur."""
    return [format_scalar(v) for v in values]


def format_matrix(array: np.ndarray) -> list[list[str | float]]:
    """Sérialise une matrice."""
    return [format_vector(row) for row in array]


def rational_bit_size(value: Fraction) -> int:
    """Taille binaire d'un rationnel (numérateur plus dénominateur)."""
    return abs(value.numerator).bit_length() + value.denominator.bit_length()
