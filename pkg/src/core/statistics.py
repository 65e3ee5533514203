"""Estimateurs par lots (batch means) et ajustement de queue géométrique."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Final

import numpy as np
from scipy import stats


# Niveau de confiance des demi-largeurs
CONFIDENCE_LEVEL: Final[float] = 0.95


def half_width(samples: np.ndarray, level: float = CONFIDENCE_LEVEL) -> np.ndarray:
    """Demi-largeur de Student sur les moyennes de lots (axe 0).

    Retourne inf avec moins de deux lots.
    """
    count: int = samples.shape[0]
    if count < 2:
        return np.full(samples.shape[1:], math.inf)
    quantile: float = float(stats.t.ppf(0.5 + level / 2, count - 1))
    return quantile * samples.std(axis=0, ddof=1) / math.sqrt(count)


def ratio_estimate(
    numerators: np.ndarray,
    denominators: np.ndarray,
    level: float = CONFIDENCE_LEVEL,
) -> tuple[np.ndarray, np.ndarray]:
    """Estimateur ratio sum(num) / sum(den) et demi-largeur par lots.

    Args:
        numerators: Sommes par lot (lots x k)
        denominators: Sommes par lot (lots)
        level: Niveau de confiance

    Returns:
        Tuple (estimation, demi-largeur)
    """
    point: np.ndarray = numerators.sum(axis=0) / denominators.sum()
    per_batch: np.ndarray = numerators / denominators.reshape((-1,) + (1,) * (numerators.ndim - 1))
    return point, half_width(per_batch, level)


@dataclass(frozen=True)
class TailFit:
    """Décroissance géométrique h_k ~ exp(intercept - rate * k) de l'histogramme de ||x||."""

    rate: float
    """Taux de décroissance (inf si aucune queue observée)."""

    intercept: float
    max_size: int
    """Plus grande taille observée."""

    @property
    def geometric_ratio(self) -> float:
        """Raison exp(-rate)."""
        return math.exp(-self.rate) if math.isfinite(self.rate) else 0.0

    def tail_sum(self, delta: float) -> float:
        """Extrapolation de somme_{k > max_size} exp(delta * k) h_k.

        Retourne inf si delta >= rate.
        """
        if not math.isfinite(self.rate):
            return 0.0
        if delta >= self.rate:
            return math.inf
        step: float = delta - self.rate
        return math.exp(self.intercept + step * (self.max_size + 1)) / (1.0 - math.exp(step))


def fit_tail(histogram: np.ndarray) -> TailFit:
    """Régression pondérée de log h_k sur k pour k >= 1.

    Args:
        histogram: Fraction de temps passée à chaque taille totale k

    Returns:
        TailFit (rate = inf avec moins de deux tailles observées)
    """
    sizes: np.ndarray = np.flatnonzero(histogram)
    max_size: int = int(sizes.max()) if len(sizes) else 0
    usable: np.ndarray = sizes[sizes >= 1]
    if len(usable) < 2:
        return TailFit(rate=math.inf, intercept=-math.inf, max_size=max_size)

    weights: np.ndarray = np.sqrt(histogram[usable])
    slope, intercept = np.polyfit(usable.astype(float), np.log(histogram[usable]), 1, w=weights)
    rate: float = -float(slope)
    if rate <= 0:
        rate = 0.0
    return TailFit(rate=rate, intercept=float(intercept), max_size=max_size)
