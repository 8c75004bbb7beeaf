"""
Synthetic instances and logged datasets.

All randomness comes from ``numpy.random.Generator`` with the PCG64 bit
generator, seeded explicitly, so every output is a pure function of its
arguments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assortment import (CardinalityCapped, ExplicitSpace, NestedPrefixFree, Unconstrained,
                         optimize, sample_from_space, space_from_dict)
from .data import OfflineDataset
from .models import (LCL, MNL, NL, ChoiceModel, ItemCatalog, ParamBounds, expected_revenue,
                     model_from_dict, offer_mask)

RNG_ALGORITHM = "numpy.random.PCG64"
MAX_FEATURE_TRIES = 1_000_000
UTILITY_CEILING = -0.6
REVENUE_RANGE = (5.0, 8.0)


@dataclass(eq=False)
class Instance:
    catalog: ItemCatalog
    true_model: ChoiceModel
    space: object
    optimal_assortment: tuple
    optimal_value: float

    def to_dict(self) -> dict:
        return {
            "catalog": self.catalog.to_dict(),
            "model": self.true_model.to_dict(),
            "space": self.space.to_dict(),
            "optimal_assortment": list(self.optimal_assortment),
            "optimal_value": self.optimal_value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        return cls(ItemCatalog.from_dict(data["catalog"]), model_from_dict(data["model"]),
                   space_from_dict(data["space"]), tuple(data["optimal_assortment"]),
                   float(data["optimal_value"]))


@dataclass(frozen=True)
class SamplingPlan:
    """Log ``s*`` with probability ``p_star``; otherwise a uniform other assortment."""

    p_star: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.p_star <= 1:
            raise ValueError("p_star must lie in (0, 1]")


def _unit(rng: np.random.Generator, d: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(d)
        norm = np.linalg.norm(v)
        if norm > 0:
            return v / norm


def _features_below(rng, theta0: np.ndarray, count: int) -> np.ndarray:
    feats = np.empty((count, theta0.size))
    for j in range(count):
        for _ in range(MAX_FEATURE_TRIES):
            x = _unit(rng, theta0.size)
            if x @ theta0 <= UTILITY_CEILING:
                feats[j] = x
                break
        else:
            raise RuntimeError(f"no feature vector with utility <= {UTILITY_CEILING} "
                               f"after {MAX_FEATURE_TRIES} draws")
    return feats


def _finish(catalog, model, space) -> Instance:
    s_star, value = optimize(catalog, model, space)
    return Instance(catalog, model, space, s_star, value)


def gen_mnl_instance(N: int, K: int, d: int, seed: int) -> Instance:
    if not (N >= K >= 1 and d >= 1):
        raise ValueError("need N >= K >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    theta0 = _unit(rng, d)
    revenues = rng.uniform(*REVENUE_RANGE, size=N)
    feats = _features_below(rng, theta0, N)
    return _finish(ItemCatalog(feats, revenues), MNL(theta0), CardinalityCapped(K))


def gen_nl_instance(K: int, kappa: int, d: int, seed: int,
                    bounds: ParamBounds = ParamBounds(), allow_empty_nests: bool = True) -> Instance:
    """Nested-logit instance with ``K`` contiguous nests of ``kappa`` items each."""
    if not (K >= 1 and kappa >= 1 and d >= 1):
        raise ValueError("need K, kappa, d >= 1")
    rng = np.random.default_rng(seed)
    theta0 = _unit(rng, d)
    lambdas = rng.uniform(bounds.lambda_min, 1.0, size=K)
    N = K * kappa
    revenues = rng.uniform(*REVENUE_RANGE, size=N)
    feats = _features_below(rng, theta0, N)
    nests = [list(range(k * kappa + 1, (k + 1) * kappa + 1)) for k in range(K)]
    return _finish(ItemCatalog(feats, revenues, nests), NL(theta0, lambdas),
                   NestedPrefixFree(allow_empty_nests))


def gen_two_item_instance(class_attractions=((10.0, 0.1), (0.1, 10.0)),
                          revenues=(0.2, 1.0)) -> Instance:
    """Two items, two equally likely customer classes, indicator features.

    Class ``k`` has attraction ``class_attractions[k][j]`` for item ``j``; the
    space is every nonempty subset of the two items.
    """
    thetas = np.log(np.asarray(class_attractions, dtype=float))
    model = LCL(thetas, np.array([0.5, 0.5]))
    catalog = ItemCatalog(np.eye(2), revenues)
    return _finish(catalog, model, Unconstrained())


def sample_dataset(instance: Instance, n: int, plan: SamplingPlan) -> OfflineDataset:
    """Draw ``n`` logged (assortment, choice) records under ``plan``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(plan.seed)
    catalog = instance.catalog
    s_star = instance.optimal_assortment
    others_exist = instance.space.size(catalog) > 1
    hits = rng.random(n) < plan.p_star
    assortments = []
    for i in range(n):
        if hits[i] or not others_exist:
            assortments.append(s_star)
        else:
            assortments.append(sample_from_space(instance.space, catalog, rng, exclude=s_star))
    probs = np.exp(instance.true_model.log_probs(catalog, offer_mask(assortments, catalog.num_items)))
    u = rng.random(n)
    cdf = np.cumsum(probs, axis=1)
    choices = np.minimum((u[:, None] >= cdf).sum(axis=1), catalog.num_items)
    # guard against round-off landing on an unoffered column
    for i in range(n):
        if choices[i] != 0 and probs[i, choices[i]] == 0:
            offered = np.flatnonzero(probs[i] > 0)
            choices[i] = offered[offered <= choices[i]].max()
    return OfflineDataset([(s, int(a)) for s, a in zip(assortments, choices)], catalog.num_items)


def gen_minimax_instance(d: int, n: int, seed: int, target_item: int = 1):
    """Hard instance for the lower bound: scaled coordinate features, sign-vector tastes.

    Item ``i`` has feature ``e_i / eps`` with ``eps = sqrt(n)``; the taste vector
    is ``sqrt(d) * v`` for a seeded sign vector ``v``; only ``target_item`` earns
    revenue; offers are single items, uniformly. Returns the instance, the
    sampling plan and the sign vector.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if n < d:
        raise ValueError(f"need n >= d (n={n}, d={d})")
    if not 1 <= target_item <= d:
        raise ValueError("target_item must be one of the items")
    rng = np.random.default_rng(seed)
    eps = np.sqrt(n)
    signs = rng.choice(np.array([-1.0, 1.0]), size=d)
    theta = np.sqrt(d) * signs
    feats = np.eye(d) / eps
    revenues = np.zeros(d)
    revenues[target_item - 1] = 1.0
    util = feats @ theta
    if np.any(np.abs(util) > 1.0 + 1e-12):
        raise ValueError("construction violates |theta^T x| <= 1")
    catalog = ItemCatalog(feats, revenues)
    space = ExplicitSpace(tuple((i,) for i in range(1, d + 1)))
    instance = _finish(catalog, MNL(theta), space)
    # with s* excluded the remaining mass is uniform over the other singletons
    plan = SamplingPlan(1.0 / d, seed)
    return instance, plan, signs


def neighbor_models(signs: np.ndarray, scale: float):
    """Pairs (i, model_v, model_v') for sign vectors differing only in coordinate i."""
    out = []
    for i in range(signs.size):
        flipped = signs.copy()
        flipped[i] = -flipped[i]
        out.append((i + 1, MNL(scale * signs), MNL(scale * flipped)))
    return out
