"""
Assortment spaces and revenue maximization for a known choice model.

``solve_mnl_lp`` and ``solve_nl_lp`` solve linear-programming reductions and
then canonicalize: among all optimal assortments they return the
lexicographically smallest sorted tuple, which is also what ``brute_force``
returns, so the exact optimizers and the oracle agree even on ties.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np

from .lp import LinearProgram, solve_lp
from .models import (MNL, NL, ChoiceModel, ItemCatalog, expected_revenue,
                     expected_revenues, make_assortment)

SNAP_TOL = 1e-6
BRUTE_FORCE_CAP = 2 ** 20


class RecoveryError(RuntimeError):
    """LP solution could not be mapped back to an integral assortment."""


class EnumerationCapError(ValueError):
    """Space is too large for exhaustive search."""


# ---------------------------------------------------------------------------
# Spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CardinalityCapped:
    """All nonempty assortments with at most ``cap`` items."""

    cap: int

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("cardinality cap must be >= 1")

    def contains(self, s, catalog: ItemCatalog) -> bool:
        return 1 <= len(s) <= self.cap

    def size(self, catalog: ItemCatalog) -> int:
        n = catalog.num_items
        return sum(comb(n, m) for m in range(1, min(self.cap, n) + 1))

    def to_dict(self) -> dict:
        return {"kind": "capped", "cap": self.cap}


@dataclass(frozen=True)
class Unconstrained:
    """Every nonempty subset of the catalog."""

    def contains(self, s, catalog: ItemCatalog) -> bool:
        return len(s) >= 1

    def size(self, catalog: ItemCatalog) -> int:
        return 2 ** catalog.num_items - 1

    def to_dict(self) -> dict:
        return {"kind": "unconstrained"}


@dataclass(frozen=True)
class NestedPrefixFree:
    """Unions of per-nest subsets; with ``allow_empty_nests=False`` every nest is hit."""

    allow_empty_nests: bool = True

    def contains(self, s, catalog: ItemCatalog) -> bool:
        if not s:
            return False
        if self.allow_empty_nests:
            return True
        hit = set(catalog.nest_index[np.asarray(s) - 1].tolist())
        return len(hit) == catalog.num_nests

    def size(self, catalog: ItemCatalog) -> int:
        if self.allow_empty_nests:
            return 2 ** catalog.num_items - 1
        return int(np.prod([2 ** len(b) - 1 for b in catalog.nests]))

    def to_dict(self) -> dict:
        return {"kind": "nested", "allow_empty_nests": self.allow_empty_nests}


@dataclass(frozen=True)
class ExplicitSpace:
    """A fixed list of assortments."""

    assortments: tuple

    def __post_init__(self):
        canon = tuple(sorted({tuple(sorted(int(j) for j in s)) for s in self.assortments}))
        if not canon or any(len(s) == 0 for s in canon):
            raise ValueError("explicit space needs nonempty assortments")
        object.__setattr__(self, "assortments", canon)

    def contains(self, s, catalog: ItemCatalog) -> bool:
        return tuple(s) in self.assortments

    def size(self, catalog: ItemCatalog) -> int:
        return len(self.assortments)

    def to_dict(self) -> dict:
        return {"kind": "explicit", "assortments": [list(s) for s in self.assortments]}


AssortmentSpace = object  # any of the classes above


def space_from_dict(data: dict):
    kind = data["kind"]
    if kind == "capped":
        return CardinalityCapped(int(data["cap"]))
    if kind == "unconstrained":
        return Unconstrained()
    if kind == "nested":
        return NestedPrefixFree(bool(data.get("allow_empty_nests", True)))
    if kind == "explicit":
        return ExplicitSpace(tuple(tuple(s) for s in data["assortments"]))
    raise ValueError(f"unknown space kind {kind!r}")


def check_in_space(s, space, catalog: ItemCatalog):
    s = make_assortment(s, catalog.num_items)
    if not space.contains(s, catalog):
        raise ValueError(f"assortment {list(s)} is outside the space {space}")
    return s


def _uniform_capped(n: int, cap: int, rng: np.random.Generator) -> tuple:
    sizes = np.arange(1, cap + 1)
    weights = np.array([comb(n, int(m)) for m in sizes], dtype=float)
    m = int(rng.choice(sizes, p=weights / weights.sum()))
    return tuple(sorted(int(j) + 1 for j in rng.choice(n, size=m, replace=False)))


def _uniform_nonempty_subset(items, rng: np.random.Generator) -> list:
    items = list(items)
    while True:
        keep = rng.random(len(items)) < 0.5
        if keep.any():
            return [j for j, k in zip(items, keep) if k]


def sample_from_space(space, catalog: ItemCatalog, rng: np.random.Generator,
                      exclude: Optional[tuple] = None, max_tries: int = 1_000_000) -> tuple:
    """Uniform draw from ``space``, optionally excluding one assortment.

    Capped and unconstrained spaces draw a size with probability proportional
    to the number of subsets of that size and then a uniform subset of it.
    """
    n = catalog.num_items
    if isinstance(space, ExplicitSpace):
        pool = [s for s in space.assortments if s != exclude]
        if not pool:
            raise ValueError("no assortment left to sample")
        return pool[int(rng.integers(len(pool)))]
    if space.size(catalog) - (exclude is not None) < 1:
        raise ValueError("no assortment left to sample")
    for _ in range(max_tries):
        if isinstance(space, CardinalityCapped):
            s = _uniform_capped(n, min(space.cap, n), rng)
        elif isinstance(space, Unconstrained) or (
                isinstance(space, NestedPrefixFree) and space.allow_empty_nests):
            s = _uniform_capped(n, n, rng)
        elif isinstance(space, NestedPrefixFree):
            s = tuple(sorted(j for nest in catalog.nests for j in _uniform_nonempty_subset(nest, rng)))
        else:
            raise TypeError(f"unsupported space {space!r}")
        if s != exclude:
            return s
    raise RuntimeError("rejection sampling did not terminate")


# ---------------------------------------------------------------------------
# Brute force
# ---------------------------------------------------------------------------


def _subset_masks(n: int, sizes) -> np.ndarray:
    rows = []
    for m in sizes:
        for combo in itertools.combinations(range(n), m):
            row = np.zeros(n, dtype=bool)
            row[list(combo)] = True
            rows.append(row)
    return np.array(rows, dtype=bool).reshape(-1, n)


def _all_nonempty_masks(n: int) -> np.ndarray:
    codes = np.arange(1, 2 ** n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


def enumerate_space(catalog: ItemCatalog, space, cap: int = BRUTE_FORCE_CAP) -> np.ndarray:
    """Offer masks for every assortment in ``space``."""
    size = space.size(catalog)
    if size > cap:
        raise EnumerationCapError(f"space has {size} assortments, cap is {cap}")
    n = catalog.num_items
    if isinstance(space, CardinalityCapped):
        return _subset_masks(n, range(1, min(space.cap, n) + 1))
    if isinstance(space, Unconstrained):
        return _all_nonempty_masks(n)
    if isinstance(space, NestedPrefixFree):
        masks = _all_nonempty_masks(n)
        if not space.allow_empty_nests:
            hits = np.stack([masks[:, np.asarray(b) - 1].any(axis=1) for b in catalog.nests], axis=1)
            masks = masks[hits.all(axis=1)]
        return masks
    if isinstance(space, ExplicitSpace):
        masks = np.zeros((len(space.assortments), n), dtype=bool)
        for i, s in enumerate(space.assortments):
            masks[i, np.asarray(s) - 1] = True
        return masks
    raise TypeError(f"unsupported space {space!r}")


def _mask_to_tuple(row: np.ndarray) -> tuple:
    return tuple(int(j) + 1 for j in np.flatnonzero(row))


def brute_force(catalog: ItemCatalog, model: ChoiceModel, space,
                cap: int = BRUTE_FORCE_CAP, chunk: int = 1 << 15):
    """Exhaustive argmax of expected revenue; ties go to the smallest sorted tuple."""
    masks = enumerate_space(catalog, space, cap)
    values = np.concatenate([expected_revenues(model, catalog, masks[i:i + chunk])
                             for i in range(0, masks.shape[0], chunk)])
    best = values.max()
    tol = 1e-10 * max(1.0, abs(best))
    tied = np.flatnonzero(values >= best - tol)
    s = min(_mask_to_tuple(masks[i]) for i in tied)
    return s, float(expected_revenue(model, catalog, s))


# ---------------------------------------------------------------------------
# MNL
# ---------------------------------------------------------------------------


def _snap(values: np.ndarray) -> np.ndarray:
    snapped = np.round(values)
    if np.any(np.abs(values - snapped) > SNAP_TOL) or np.any((snapped != 0) & (snapped != 1)):
        raise RecoveryError(f"non-integral LP recovery {values.tolist()}")
    return snapped.astype(int)


def _tie_threshold(best: float) -> float:
    """Revenue level above which an assortment counts as tied with ``best``."""
    return best - 1e-10 * max(1.0, abs(best))


def _mnl_lex_smallest(weights: np.ndarray, target: float, cap: int) -> tuple:
    """Smallest sorted tuple with size <= cap and sum(weights) >= target."""
    n = weights.size
    chosen: list = []
    total = 0.0
    while True:
        if chosen and total >= target:
            return tuple(j + 1 for j in chosen)
        start = chosen[-1] + 1 if chosen else 0
        room = cap - len(chosen) - 1
        for j in range(start, n):
            rest = np.sort(weights[j + 1:])[::-1][:max(room, 0)]
            if total + weights[j] + rest[rest > 0].sum() >= target:
                chosen.append(j)
                total += weights[j]
                break
        else:
            raise RecoveryError("no assortment attains the LP optimum")


def solve_mnl_lp(catalog: ItemCatalog, model: MNL, space: CardinalityCapped):
    """Capped MNL assortment optimization by linear programming.

    Variables are ``y_j = P(j) / v_j`` and ``t = P(0)``; the constraint
    matrix in ``gamma_j = y_j / t`` is totally unimodular, so an optimal
    vertex recovers an integral assortment.
    """
    if not isinstance(model, MNL):
        raise TypeError("solve_mnl_lp needs an MNL model")
    if not isinstance(space, CardinalityCapped):
        raise TypeError("solve_mnl_lp needs a CardinalityCapped space")
    n = catalog.num_items
    cap = min(space.cap, n)
    util = catalog.features @ model.theta
    # one common rescaling of all attractions (outside option included) is free;
    # centre the log-attractions so the LP sees the smallest dynamic range
    shift = 0.5 * (max(0.0, float(util.max())) + min(0.0, float(util.min())))
    v = np.exp(util - shift)
    outside = np.exp(-shift)
    r = catalog.revenues

    # variables: y_1..y_n and t = P(0) / outside, so gamma_j = y_j / t
    obj = np.concatenate([r * v, [0.0]])
    rows = [(np.concatenate([v, [outside]]), "=", 1.0),
            (np.concatenate([np.ones(n), [-float(cap)]]), "<=", 0.0)]
    for j in range(n):
        row = np.zeros(n + 1)
        row[j] = 1.0
        row[n] = -1.0
        rows.append((row, "<=", 0.0))
    sol = solve_lp(LinearProgram(obj, rows))
    if sol.status != "optimal":
        raise RecoveryError(f"MNL assortment LP returned {sol.status}")
    y, t = sol.x[:n], sol.x[n]
    if t <= 0:
        raise RecoveryError("MNL assortment LP has zero no-purchase mass")
    gamma = _snap(y / t)
    if gamma.sum() == 0:
        gamma[np.argmax(r * v)] = 1
    recovered = tuple(int(j) + 1 for j in np.flatnonzero(gamma))
    best = expected_revenue(model, catalog, recovered)

    # V(s) >= z  <=>  sum_{j in s} (r_j - z) v_j >= z
    z = _tie_threshold(best)
    s = _mnl_lex_smallest((r - z) * np.exp(util), z, cap)
    return s, float(expected_revenue(model, catalog, s))


# ---------------------------------------------------------------------------
# Nested logit
# ---------------------------------------------------------------------------


def nest_prefix_options(catalog: ItemCatalog, model: NL, with_singletons: bool = False):
    """Per nest: candidate sub-assortments with their (V^lambda, R) summaries.

    Candidates are the revenue-ordered prefixes (ties in revenue broken by
    item id), optionally extended by every singleton. Returns a list over
    nests of lists ``(items_tuple, attraction, revenue)`` where
    ``attraction = V_k^lambda_k`` and ``revenue`` is the within-nest average.
    """
    util = catalog.features @ model.theta
    r = catalog.revenues
    out = []
    for k, nest in enumerate(catalog.nests):
        lam = model.lambdas[k]
        order = sorted(nest, key=lambda j: (-r[j - 1], j))
        sets = [order[:m] for m in range(1, len(order) + 1)]
        if with_singletons:
            sets += [[j] for j in order[1:]]
        options = []
        for items in sets:
            idx = np.asarray(items) - 1
            z = util[idx] / lam
            top = z.max()
            ez = np.exp(z - top)
            log_v = top + np.log(ez.sum())
            options.append((tuple(sorted(items)), float(np.exp(lam * log_v)),
                            float(ez @ r[idx] / ez.sum())))
        out.append(options)
    return out


class _NestTable:
    """All subsets of one nest with their gain ``V^lambda (R - z)`` at a fixed z."""

    def __init__(self, items, util, revenues, lam, z):
        self.items = np.asarray(sorted(items))
        size = self.items.size
        codes = np.arange(2 ** size, dtype=np.int64)
        self.masks = codes
        bits = ((codes[:, None] >> np.arange(size)) & 1).astype(bool)
        zz = np.where(bits, util[self.items - 1][None, :] / lam, -np.inf)
        top = zz.max(axis=1, keepdims=True)
        top[~np.isfinite(top)] = 0.0
        ez = np.exp(zz - top)
        total = ez.sum(axis=1)
        gain = np.zeros(codes.size)
        nz = total > 0
        log_v = top[nz, 0] + np.log(total[nz])
        avg = (ez[nz] @ (revenues[self.items - 1] - z)) / total[nz]
        gain[nz] = np.exp(lam * log_v) * avg
        self.gain = gain

    def local_mask(self, chosen: set) -> int:
        return sum(1 << i for i, j in enumerate(self.items) if j in chosen)

    def low_mask(self, upto: int) -> int:
        return sum(1 << i for i, j in enumerate(self.items) if j <= upto)

    def best(self, chosen: set, upto: int, need_nonempty: bool) -> float:
        low = self.low_mask(upto)
        ok = (self.masks & low) == self.local_mask(chosen)
        if need_nonempty:
            ok &= self.masks != 0
        return float(self.gain[ok].max()) if ok.any() else -np.inf


def _nl_lex_smallest(catalog: ItemCatalog, model: NL, z: float, allow_empty: bool) -> tuple:
    """Smallest sorted tuple S in the space with V(S) >= z.

    Uses V(S) >= z  <=>  sum_k V_k(S_k)^lambda_k (R_k(S_k) - z) >= z, which is
    separable over nests, so each step only needs the best completion per nest.
    """
    util = catalog.features @ model.theta
    tables = [_NestTable(nest, util, catalog.revenues, model.lambdas[k], z)
              for k, nest in enumerate(catalog.nests)]
    n = catalog.num_items
    chosen: list = []

    def attainable(items: set, upto: int) -> bool:
        return sum(t.best(items, upto, not allow_empty) for t in tables) >= z

    while True:
        current = set(chosen)
        if chosen and attainable(current, n):
            return tuple(chosen)
        start = chosen[-1] + 1 if chosen else 1
        for j in range(start, n + 1):
            if attainable(current | {j}, j):
                chosen.append(j)
                break
        else:
            raise RecoveryError("no assortment attains the LP optimum")


def solve_nl_lp(catalog: ItemCatalog, model: NL, space: Optional[NestedPrefixFree] = None):
    """Nested-logit assortment optimization by linear programming.

    Solves ``min eta`` subject to ``eta >= sum_k y_k`` and
    ``y_k >= A_km (R_km - eta)`` for every candidate ``m`` of every nest
    ``k``, plus ``y_k >= 0`` when a nest may be left empty. Candidates are
    revenue-ordered prefixes; when every nest must be hit, singletons are
    added too, since the best nonempty choice in a nest whose items all earn
    below ``eta`` is a single item. Each nest then takes a candidate
    maximizing ``A (R - eta*)``.
    """
    if not isinstance(model, NL):
        raise TypeError("solve_nl_lp needs an NL model")
    space = NestedPrefixFree() if space is None else space
    if not isinstance(space, NestedPrefixFree):
        raise TypeError("solve_nl_lp needs a NestedPrefixFree space")
    model.check(catalog)
    allow_empty = space.allow_empty_nests
    options = nest_prefix_options(catalog, model, with_singletons=not allow_empty)
    nk = len(options)

    # variables: eta, y_1..y_K (all free); maximize -eta
    obj = np.zeros(nk + 1)
    obj[0] = -1.0
    rows = [(np.concatenate([[1.0], -np.ones(nk)]), ">=", 0.0)]
    for k, opts in enumerate(options):
        for _, attraction, avg_r in opts:
            row = np.zeros(nk + 1)
            row[0] = attraction
            row[k + 1] = 1.0
            rows.append((row, ">=", attraction * avg_r))
        if allow_empty:
            row = np.zeros(nk + 1)
            row[k + 1] = 1.0
            rows.append((row, ">=", 0.0))
    sol = solve_lp(LinearProgram(obj, rows, lower=np.full(nk + 1, -np.inf)))
    if sol.status != "optimal":
        raise RecoveryError(f"NL assortment LP returned {sol.status}")
    eta = float(sol.x[0])

    recovered: list = []
    for opts in options:
        gains = [a * (rv - eta) for _, a, rv in opts]
        k_best = int(np.argmax(gains))
        if allow_empty and gains[k_best] <= 0:
            continue
        recovered.extend(opts[k_best][0])
    best = expected_revenue(model, catalog, recovered) if recovered else 0.0

    if max(len(b) for b in catalog.nests) <= 16:
        s = _nl_lex_smallest(catalog, model, _tie_threshold(best), allow_empty)
    else:
        s = make_assortment(recovered, catalog.num_items) if recovered else (1,)
    return s, float(expected_revenue(model, catalog, s))


def optimize(catalog: ItemCatalog, model: ChoiceModel, space):
    """Dispatch to the exact optimizer for the family, or brute force otherwise."""
    if isinstance(model, MNL) and isinstance(space, CardinalityCapped):
        return solve_mnl_lp(catalog, model, space)
    if isinstance(model, NL) and isinstance(space, NestedPrefixFree):
        return solve_nl_lp(catalog, model, space)
    if isinstance(model, MNL) and isinstance(space, Unconstrained):
        return solve_mnl_lp(catalog, model, CardinalityCapped(catalog.num_items))
    return brute_force(catalog, model, space)
