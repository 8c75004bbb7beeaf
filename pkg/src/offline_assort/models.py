"""
Choice models over a finite item catalog.

Three families are supported: multinomial logit (MNL), latent class logit
(LCL, a finite mixture of MNLs) and nested logit (NL). Every family exposes
the same vectorized kernel: given a boolean offer matrix of shape (m, N) it
returns log choice probabilities of shape (m, N + 1), column 0 being the
no-purchase option. Gradients are analytic and are formed by contracting the
score ``d log p(a|s) / d params`` against an outcome-weight matrix, so the
NLL gradient and the revenue gradient share one code path.

Items are 1-based in the public API (item ``j`` lives in column ``j`` of the
probability matrix and row ``j - 1`` of the feature matrix).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

Assortment = tuple  # strictly increasing tuple of 1-based item ids


class DimensionError(ValueError):
    """Model and catalog (or parameter vector) disagree on a dimension."""


class ZeroProbabilityError(ValueError):
    """A logged record has zero probability under the model."""

    def __init__(self, message: str, record: int):
        super().__init__(message)
        self.record = record


# ---------------------------------------------------------------------------
# Catalog and assortments
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ItemCatalog:
    """Items with feature vectors, revenues and an optional nest partition.

    Args:
        features: array of shape (N, d).
        revenues: array of shape (N,), nonnegative.
        nests: optional sequence of K disjoint, nonempty lists of 1-based item
            ids covering 1..N.
    """

    features: np.ndarray
    revenues: np.ndarray
    nests: Optional[tuple] = None
    nest_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.revenues = np.asarray(self.revenues, dtype=float).reshape(-1)
        n = self.features.shape[0]
        if self.revenues.shape[0] != n:
            raise DimensionError(
                f"{n} feature rows but {self.revenues.shape[0]} revenues")
        if n < 1:
            raise ValueError("catalog needs at least one item")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if np.any(self.revenues < 0) or not np.all(np.isfinite(self.revenues)):
            raise ValueError("revenues must be finite and nonnegative")
        self.nest_index = np.full(n, -1, dtype=int)
        if self.nests is not None:
            nests = tuple(tuple(int(j) for j in nest) for nest in self.nests)
            for k, nest in enumerate(nests):
                if not nest:
                    raise ValueError(f"nest {k} is empty")
                for j in nest:
                    if not 1 <= j <= n:
                        raise ValueError(f"nest item {j} outside 1..{n}")
                    if self.nest_index[j - 1] != -1:
                        raise ValueError(f"item {j} appears in two nests")
                    self.nest_index[j - 1] = k
            if np.any(self.nest_index < 0):
                missing = np.flatnonzero(self.nest_index < 0) + 1
                raise ValueError(f"nests do not cover items {missing.tolist()}")
            self.nests = nests

    @property
    def num_items(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_nests(self) -> int:
        return 0 if self.nests is None else len(self.nests)

    def to_dict(self) -> dict:
        return {
            "n": self.num_items,
            "d": self.dim,
            "features": self.features.tolist(),
            "revenues": self.revenues.tolist(),
            "nests": None if self.nests is None else [list(b) for b in self.nests],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ItemCatalog":
        cat = cls(np.asarray(data["features"], dtype=float).reshape(data["n"], data["d"]),
                  data["revenues"], data.get("nests"))
        return cat


def make_assortment(items: Iterable[int], num_items: int) -> Assortment:
    """Validate and canonicalize an assortment into a sorted tuple."""
    s = tuple(sorted(int(j) for j in items))
    if not s:
        raise ValueError("assortment must be nonempty")
    if len(set(s)) != len(s):
        raise ValueError(f"duplicate items in assortment {s}")
    if s[0] < 1 or s[-1] > num_items:
        raise ValueError(f"assortment {s} has ids outside 1..{num_items}")
    return s


def offer_mask(assortments: Sequence[Sequence[int]], num_items: int) -> np.ndarray:
    """Boolean (m, N) matrix with True where item j is offered in row i."""
    mask = np.zeros((len(assortments), num_items), dtype=bool)
    for i, s in enumerate(assortments):
        mask[i, np.asarray(s, dtype=int) - 1] = True
    return mask


# ---------------------------------------------------------------------------
# Parameter bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamBounds:
    """Bounds on the parameter space used by projections and feasibility checks."""

    theta_norm_cap: float = 10.0
    feature_norm_cap: float = 1.0
    lambda_min: float = 0.05

    def __post_init__(self):
        if not (np.isfinite(self.theta_norm_cap) and self.theta_norm_cap > 0):
            raise ValueError("theta_norm_cap must be finite and positive")
        if not (np.isfinite(self.feature_norm_cap) and self.feature_norm_cap > 0):
            raise ValueError("feature_norm_cap must be finite and positive")
        if not 0 < self.lambda_min < 1:
            raise ValueError("lambda_min must lie in (0, 1)")

    @property
    def lambda_cap(self) -> float:
        return 1.0 / self.lambda_min


def _project_ball(theta: np.ndarray, radius: float) -> np.ndarray:
    norm = np.linalg.norm(theta)
    if norm > radius:
        return theta * (radius / norm)
    return theta


def project_simplex(w: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    w = np.asarray(w, dtype=float)
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, w.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    return np.maximum(w - tau, 0.0)


# ---------------------------------------------------------------------------
# Model families
# ---------------------------------------------------------------------------


def _mnl_log_probs(utilities: np.ndarray, mask: np.ndarray) -> np.ndarray:
    m = mask.shape[0]
    full = np.empty((m, mask.shape[1] + 1))
    full[:, 0] = 0.0
    full[:, 1:] = np.where(mask, utilities[None, :], -np.inf)
    return full - logsumexp(full, axis=1, keepdims=True)


def _mnl_contract(features_ext: np.ndarray, probs: np.ndarray,
                  weights: np.ndarray) -> np.ndarray:
    # sum_r sum_a W[r,a] (x_a - xbar_r), with x_0 = 0
    xbar = probs @ features_ext
    return weights.sum(axis=0) @ features_ext - weights.sum(axis=1) @ xbar


@dataclass(eq=False)
class MNL:
    """Multinomial logit with attraction exp(x_j . theta) and outside weight 1."""

    theta: np.ndarray
    family = "mnl"

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)

    @property
    def dim(self) -> int:
        return self.theta.size

    def params(self) -> np.ndarray:
        return self.theta.copy()

    def with_params(self, vec: np.ndarray) -> "MNL":
        vec = np.asarray(vec, dtype=float)
        if vec.size != self.theta.size:
            raise DimensionError(f"expected {self.theta.size} parameters, got {vec.size}")
        return MNL(vec.copy())

    def check(self, catalog: ItemCatalog) -> None:
        if catalog.dim != self.dim:
            raise DimensionError(f"model dim {self.dim} != catalog dim {catalog.dim}")

    def log_probs(self, catalog: ItemCatalog, mask: np.ndarray) -> np.ndarray:
        self.check(catalog)
        return _mnl_log_probs(catalog.features @ self.theta, mask)

    def score_contract(self, catalog: ItemCatalog, mask: np.ndarray,
                       weights: np.ndarray) -> np.ndarray:
        probs = np.exp(self.log_probs(catalog, mask))
        xe = np.vstack([np.zeros(catalog.dim), catalog.features])
        return _mnl_contract(xe, probs, weights)

    def project(self, bounds: ParamBounds) -> "MNL":
        return MNL(_project_ball(self.theta, bounds.theta_norm_cap))

    def in_bounds(self, bounds: ParamBounds, tol: float = 1e-12) -> bool:
        return bool(np.linalg.norm(self.theta) <= bounds.theta_norm_cap + tol)

    def tangent(self, direction: np.ndarray) -> np.ndarray:
        return direction

    def to_dict(self) -> dict:
        return {"family": "mnl", "theta": self.theta.tolist()}


@dataclass(eq=False)
class LCL:
    """Latent class logit: a mixture of K MNL components with simplex weights."""

    thetas: np.ndarray
    weights: np.ndarray
    family = "lcl"

    def __post_init__(self):
        self.thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.weights.size != self.thetas.shape[0]:
            raise DimensionError(
                f"{self.thetas.shape[0]} classes but {self.weights.size} weights")

    @property
    def num_classes(self) -> int:
        return self.thetas.shape[0]

    @property
    def dim(self) -> int:
        return self.thetas.shape[1]

    def params(self) -> np.ndarray:
        return np.concatenate([self.thetas.ravel(), self.weights])

    def with_params(self, vec: np.ndarray) -> "LCL":
        vec = np.asarray(vec, dtype=float)
        k, d = self.thetas.shape
        if vec.size != k * d + k:
            raise DimensionError(f"expected {k * d + k} parameters, got {vec.size}")
        return LCL(vec[:k * d].reshape(k, d).copy(), vec[k * d:].copy())

    def check(self, catalog: ItemCatalog) -> None:
        if catalog.dim != self.dim:
            raise DimensionError(f"model dim {self.dim} != catalog dim {catalog.dim}")

    def _components(self, catalog, mask):
        self.check(catalog)
        comp = np.stack([_mnl_log_probs(catalog.features @ th, mask) for th in self.thetas])
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return comp, logw

    def log_probs(self, catalog: ItemCatalog, mask: np.ndarray) -> np.ndarray:
        comp, logw = self._components(catalog, mask)
        return logsumexp(comp + logw[:, None, None], axis=0)

    def score_contract(self, catalog: ItemCatalog, mask: np.ndarray,
                       weights: np.ndarray) -> np.ndarray:
        comp, logw = self._components(catalog, mask)
        logp = logsumexp(comp + logw[:, None, None], axis=0)
        finite = np.isfinite(logp)
        safe_logp = np.where(finite, logp, 0.0)
        xe = np.vstack([np.zeros(catalog.dim), catalog.features])
        k, d = self.thetas.shape
        g_theta = np.empty((k, d))
        g_w = np.empty(k)
        for c in range(k):
            ratio = np.where(finite, np.exp(comp[c] - safe_logp), 0.0)  # g_c / p
            resp = self.weights[c] * ratio
            g_theta[c] = _mnl_contract(xe, np.exp(comp[c]), weights * resp)
            g_w[c] = np.sum(weights * ratio)
        return np.concatenate([g_theta.ravel(), g_w])

    def project(self, bounds: ParamBounds) -> "LCL":
        thetas = np.stack([_project_ball(th, bounds.theta_norm_cap) for th in self.thetas])
        return LCL(thetas, project_simplex(self.weights))

    def in_bounds(self, bounds: ParamBounds, tol: float = 1e-12) -> bool:
        norms_ok = np.all(np.linalg.norm(self.thetas, axis=1) <= bounds.theta_norm_cap + tol)
        simplex_ok = np.all(self.weights >= -tol) and abs(self.weights.sum() - 1.0) <= 1e-12
        return bool(norms_ok and simplex_ok)

    def tangent(self, direction: np.ndarray) -> np.ndarray:
        """Project a parameter-space direction onto the simplex tangent space."""
        out = np.array(direction, dtype=float)
        kd = self.thetas.size
        out[kd:] -= out[kd:].mean()
        return out

    def to_dict(self) -> dict:
        return {"family": "lcl", "thetas": self.thetas.tolist(),
                "weights": self.weights.tolist()}


@dataclass(eq=False)
class NL:
    """Nested logit with common taste vector and one dissimilarity per nest."""

    theta: np.ndarray
    lambdas: np.ndarray
    family = "nl"

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        self.lambdas = np.asarray(self.lambdas, dtype=float).reshape(-1)

    @property
    def dim(self) -> int:
        return self.theta.size

    def params(self) -> np.ndarray:
        return np.concatenate([self.theta, self.lambdas])

    def with_params(self, vec: np.ndarray) -> "NL":
        vec = np.asarray(vec, dtype=float)
        d = self.theta.size
        if vec.size != d + self.lambdas.size:
            raise DimensionError(
                f"expected {d + self.lambdas.size} parameters, got {vec.size}")
        return NL(vec[:d].copy(), vec[d:].copy())

    def check(self, catalog: ItemCatalog) -> None:
        if catalog.nests is None:
            raise DimensionError("nested logit needs a catalog with nests")
        if catalog.dim != self.dim:
            raise DimensionError(f"model dim {self.dim} != catalog dim {catalog.dim}")
        if catalog.num_nests != self.lambdas.size:
            raise DimensionError(
                f"{self.lambdas.size} lambdas for {catalog.num_nests} nests")
        if np.any(self.lambdas <= 0):
            raise ValueError("nest dissimilarities must be positive")

    def _nest_terms(self, catalog, mask):
        self.check(catalog)
        u = catalog.features @ self.theta
        z = u / self.lambdas[catalog.nest_index]
        m = mask.shape[0]
        K = catalog.num_nests
        logv = np.empty((m, K))
        cols = [np.asarray(nest) - 1 for nest in catalog.nests]
        for k, c in enumerate(cols):
            zk = np.where(mask[:, c], z[c][None, :], -np.inf)
            logv[:, k] = logsumexp(zk, axis=1)
        nonempty = np.isfinite(logv)
        attr = np.where(nonempty, self.lambdas[None, :] * np.where(nonempty, logv, 0.0), -np.inf)
        log_denom = logsumexp(np.hstack([np.zeros((m, 1)), attr]), axis=1)
        return u, z, cols, logv, nonempty, attr, log_denom

    def log_probs(self, catalog: ItemCatalog, mask: np.ndarray) -> np.ndarray:
        u, z, cols, logv, nonempty, attr, log_denom = self._nest_terms(catalog, mask)
        idx = catalog.nest_index
        lam_item = self.lambdas[idx]
        logv_item = np.where(nonempty, logv, 0.0)[:, idx]
        item = z[None, :] + (lam_item[None, :] - 1.0) * logv_item - log_denom[:, None]
        out = np.empty((mask.shape[0], mask.shape[1] + 1))
        out[:, 0] = -log_denom
        out[:, 1:] = np.where(mask, item, -np.inf)
        return out

    def score_contract(self, catalog: ItemCatalog, mask: np.ndarray,
                       weights: np.ndarray) -> np.ndarray:
        u, z, cols, logv, nonempty, attr, log_denom = self._nest_terms(catalog, mask)
        X = catalog.features
        lam = self.lambdas
        lam_item = lam[catalog.nest_index]
        w_items = weights[:, 1:]
        w_total = weights.sum(axis=1)
        nest_share = np.where(nonempty, np.exp(attr - log_denom[:, None]), 0.0)
        safe_logv = np.where(nonempty, logv, 0.0)

        g_theta = (w_items.sum(axis=0) / lam_item) @ X
        g_lam = np.zeros(lam.size)
        for k, c in enumerate(cols):
            zk = np.where(mask[:, c], z[c][None, :], -np.inf)
            within = np.where(mask[:, c], np.exp(zk - safe_logv[:, [k]]), 0.0)
            mean_x = within @ X[c]          # (m, d)
            mean_u = within @ u[c]         # (m,)
            w_nest = w_items[:, c].sum(axis=1)
            g_theta += ((lam[k] - 1.0) / lam[k]) * (w_nest @ mean_x)
            g_theta -= (w_total * nest_share[:, k]) @ mean_x
            lk2 = lam[k] ** 2
            g_lam[k] = (
                -(w_items[:, c].sum(axis=0) @ u[c]) / lk2
                + w_nest @ (safe_logv[:, k] - (lam[k] - 1.0) * mean_u / lk2)
                - (w_total * nest_share[:, k]) @ (safe_logv[:, k] - mean_u / lam[k])
            )
        return np.concatenate([g_theta, g_lam])

    def project(self, bounds: ParamBounds) -> "NL":
        return NL(_project_ball(self.theta, bounds.theta_norm_cap),
                  np.clip(self.lambdas, bounds.lambda_min, 1.0))

    def in_bounds(self, bounds: ParamBounds, tol: float = 1e-12) -> bool:
        return bool(np.linalg.norm(self.theta) <= bounds.theta_norm_cap + tol
                    and np.all(self.lambdas >= bounds.lambda_min - tol)
                    and np.all(self.lambdas <= 1.0 + tol))

    def tangent(self, direction: np.ndarray) -> np.ndarray:
        return direction

    def to_dict(self) -> dict:
        return {"family": "nl", "theta": self.theta.tolist(),
                "lambdas": self.lambdas.tolist()}


ChoiceModel = Union[MNL, LCL, NL]
FAMILIES = ("mnl", "lcl", "nl")


def model_from_dict(data: dict) -> ChoiceModel:
    family = data["family"]
    if family == "mnl":
        return MNL(data["theta"])
    if family == "lcl":
        return LCL(data["thetas"], data["weights"])
    if family == "nl":
        return NL(data["theta"], data["lambdas"])
    raise ValueError(f"unknown model family {family!r}")


def default_init(family: str, catalog: ItemCatalog, num_classes: int = 2,
                 rng: Optional[np.random.Generator] = None) -> ChoiceModel:
    """Starting point for estimation: zero tastes, uniform mixture, lambda = 1.

    LCL components get a small seeded jitter so the mixture is not stuck at
    its symmetric saddle.
    """
    d = catalog.dim
    if family == "mnl":
        return MNL(np.zeros(d))
    if family == "lcl":
        rng = rng if rng is not None else np.random.default_rng(0)
        return LCL(0.1 * rng.standard_normal((num_classes, d)),
                   np.full(num_classes, 1.0 / num_classes))
    if family == "nl":
        if catalog.nests is None:
            raise DimensionError("nested logit needs a catalog with nests")
        return NL(np.zeros(d), np.ones(catalog.num_nests))
    raise ValueError(f"unknown model family {family!r}")


# ---------------------------------------------------------------------------
# Public kernels
# ---------------------------------------------------------------------------


def choice_prob_vector(model: ChoiceModel, catalog: ItemCatalog, s) -> dict:
    """Purchase probabilities over ``s`` plus the no-purchase option 0.

    Returns a dict ``{0: p0, j: p_j, ...}`` ordered as (0, *sorted(s)).
    """
    s = make_assortment(s, catalog.num_items)
    logp = model.log_probs(catalog, offer_mask([s], catalog.num_items))[0]
    probs = np.exp(logp)
    out = {0: float(probs[0])}
    for j in s:
        out[j] = float(probs[j])
    return out


def expected_revenue(model: ChoiceModel, catalog: ItemCatalog, s) -> float:
    s = make_assortment(s, catalog.num_items)
    return float(expected_revenues(model, catalog, offer_mask([s], catalog.num_items))[0])


def expected_revenues(model: ChoiceModel, catalog: ItemCatalog, mask: np.ndarray) -> np.ndarray:
    """Expected revenue for every row of an offer mask."""
    probs = np.exp(model.log_probs(catalog, mask)[:, 1:])
    return probs @ catalog.revenues


def _record_log_probs(model, dataset, catalog):
    logp = model.log_probs(catalog, dataset.mask)
    chosen = logp[np.arange(dataset.size), dataset.choices]
    bad = ~np.isfinite(chosen)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ZeroProbabilityError(
            f"record {i} (s={dataset.records[i][0]}, a={dataset.records[i][1]}) "
            "has zero probability under the model", i)
    return chosen


def nll(model: ChoiceModel, dataset, catalog: ItemCatalog) -> float:
    """Mean negative log-likelihood of the logged choices."""
    return float(-np.mean(_record_log_probs(model, dataset, catalog)))


def nll_gradient(model: ChoiceModel, dataset, catalog: ItemCatalog) -> np.ndarray:
    """Analytic gradient of :func:`nll` in the model's parameter coordinates.

    For LCL the weights are treated as free coordinates (no simplex
    projection); callers that need a feasible direction use ``model.tangent``.
    """
    _record_log_probs(model, dataset, catalog)
    n = dataset.size
    weights = np.zeros((n, catalog.num_items + 1))
    weights[np.arange(n), dataset.choices] = -1.0 / n
    return model.score_contract(catalog, dataset.mask, weights)


def value_gradient(model: ChoiceModel, catalog: ItemCatalog, s) -> np.ndarray:
    """Gradient of ``params -> expected_revenue(model, catalog, s)``."""
    s = make_assortment(s, catalog.num_items)
    mask = offer_mask([s], catalog.num_items)
    probs = np.exp(model.log_probs(catalog, mask))
    weights = probs * np.concatenate([[0.0], catalog.revenues])[None, :]
    return model.score_contract(catalog, mask, weights)
