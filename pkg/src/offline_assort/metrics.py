"""Distances between choice models on a fixed assortment or under a sampling law."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ChoiceModel, ItemCatalog, make_assortment, offer_mask


@dataclass(frozen=True)
class AssortmentDistribution:
    """Finite law over assortments as ``(assortment, mass)`` pairs."""

    support: tuple

    def __post_init__(self):
        pairs = tuple((tuple(sorted(int(j) for j in s)), float(w)) for s, w in self.support)
        if not pairs:
            raise ValueError("distribution needs at least one atom")
        if len({s for s, _ in pairs}) != len(pairs):
            raise ValueError("duplicate assortments in distribution")
        masses = np.array([w for _, w in pairs])
        if np.any(masses <= 0):
            raise ValueError("masses must be positive")
        if abs(masses.sum() - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {masses.sum()}, not 1")
        object.__setattr__(self, "support", pairs)

    @classmethod
    def uniform(cls, assortments) -> "AssortmentDistribution":
        assortments = list(assortments)
        w = 1.0 / len(assortments)
        masses = [w] * len(assortments)
        masses[-1] = 1.0 - w * (len(assortments) - 1)
        return cls(tuple(zip(assortments, masses)))

    @property
    def assortments(self) -> list:
        return [s for s, _ in self.support]

    @property
    def masses(self) -> np.ndarray:
        return np.array([w for _, w in self.support])


def _prob_rows(p1: ChoiceModel, p2: ChoiceModel, catalog: ItemCatalog, assortments):
    """Probability rows over (0, items...) for both models; unoffered items are 0."""
    mask = offer_mask(assortments, catalog.num_items)
    return np.exp(p1.log_probs(catalog, mask)), np.exp(p2.log_probs(catalog, mask))


def _single(s, catalog):
    return [make_assortment(s, catalog.num_items)]


def hellinger_sq_probs(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Hellinger distance between two probability vectors on one outcome set."""
    return float(min(1.0, 0.5 * np.sum((np.sqrt(a) - np.sqrt(b)) ** 2)))


def hellinger_sq(p1: ChoiceModel, p2: ChoiceModel, catalog: ItemCatalog, s) -> float:
    a, b = _prob_rows(p1, p2, catalog, _single(s, catalog))
    return hellinger_sq_probs(a[0], b[0])


def hellinger_sq_many(p1, p2, catalog, assortments) -> np.ndarray:
    a, b = _prob_rows(p1, p2, catalog, assortments)
    return np.minimum(1.0, 0.5 * np.sum((np.sqrt(a) - np.sqrt(b)) ** 2, axis=1))


def generalized_hellinger_sq(p1: ChoiceModel, p2: ChoiceModel, catalog: ItemCatalog,
                             pi: AssortmentDistribution) -> float:
    """Mass-weighted average of per-assortment squared Hellinger distances."""
    return float(pi.masses @ hellinger_sq_many(p1, p2, catalog, pi.assortments))


def total_variation(p1: ChoiceModel, p2: ChoiceModel, catalog: ItemCatalog, s) -> float:
    a, b = _prob_rows(p1, p2, catalog, _single(s, catalog))
    return float(0.5 * np.abs(a - b).sum())


def kl_divergence(p1: ChoiceModel, p2: ChoiceModel, catalog: ItemCatalog, s) -> float:
    """KL(p1 || p2) in nats over ``s`` plus the no-purchase option."""
    mask = offer_mask(_single(s, catalog), catalog.num_items)
    la, lb = p1.log_probs(catalog, mask)[0], p2.log_probs(catalog, mask)[0]
    support = np.isfinite(la)
    if not np.all(np.isfinite(lb[support])):
        raise ValueError("KL undefined: p2 vanishes where p1 has mass")
    return float(max(0.0, np.sum(np.exp(la[support]) * (la[support] - lb[support]))))
