"""
Maximum-likelihood fitting and likelihood-ratio uncertainty sets.

The fitter is projected gradient descent with Armijo backtracking. Projection
keeps parameters inside :class:`ParamBounds`: every taste vector in the
Euclidean ball of radius ``theta_norm_cap``, LCL weights on the simplex and
NL dissimilarities in ``[lambda_min, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import OfflineDataset
from .models import (ChoiceModel, ItemCatalog, ParamBounds, ZeroProbabilityError,
                     default_init, nll, nll_gradient)

__all__ = [
    "OfflineDataset", "FitConfig", "FitResult", "NonFiniteLossError", "UncertaintySet",
    "fit_mle", "membership", "critical_value", "empirical_alpha", "family_dimension",
    "family_constant", "theoretical_alpha", "build_uncertainty_set",
]

ALPHA_SCALES = ("unscaled", "times_n")
MEMBERSHIP_SLACK = 1e-12


class NonFiniteLossError(FloatingPointError):
    def __init__(self, message: str, iterate: np.ndarray):
        super().__init__(message)
        self.iterate = iterate


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-8
    max_iter: int = 5000
    armijo: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1.0
    min_step: float = 1e-20
    bounds: ParamBounds = field(default_factory=ParamBounds)
    num_classes: int = 2
    seed: int = 0


@dataclass
class FitResult:
    model: ChoiceModel
    loss: float
    iterations: int
    reason: str  # "converged" | "max_iter" | "stalled"
    trace: list

    def __iter__(self):
        return iter((self.model, self.loss))


def _safe_loss(model, dataset, catalog) -> float:
    try:
        value = nll(model, dataset, catalog)
    except ZeroProbabilityError:
        return np.inf
    return value if np.isfinite(value) else np.inf


def fit_mle(family: str, dataset: OfflineDataset, catalog: ItemCatalog,
            init: Optional[ChoiceModel] = None, config: FitConfig = FitConfig()) -> FitResult:
    """Minimize the mean negative log-likelihood over the bounded family."""
    if init is None:
        init = default_init(family, catalog, config.num_classes,
                            np.random.default_rng(config.seed))
    if init.family != family:
        raise ValueError(f"init is {init.family}, expected {family}")
    bounds = config.bounds
    model = init.project(bounds)
    x = model.params()
    f = _safe_loss(model, dataset, catalog)
    if not np.isfinite(f):
        raise NonFiniteLossError("loss is not finite at the initial point", x)
    trace = [f]
    step = config.initial_step
    reason = "max_iter"
    it = 0
    for it in range(1, config.max_iter + 1):
        g = nll_gradient(model, dataset, catalog)
        if not np.all(np.isfinite(g)):
            raise NonFiniteLossError("gradient is not finite", x)
        mapped = model.with_params(x - g).project(bounds).params()
        if np.linalg.norm(x - mapped) <= config.tol:
            reason = "converged"
            it -= 1
            break
        beta = step
        while True:
            cand = model.with_params(x - beta * g).project(bounds)
            xn = cand.params()
            fn = _safe_loss(cand, dataset, catalog)
            if fn <= f + config.armijo * (g @ (xn - x)):
                break
            beta *= config.shrink
            if beta < config.min_step:
                cand = None
                break
        if cand is None:
            reason = "stalled"
            break
        if np.array_equal(xn, x):
            reason = "stalled"
            break
        model, x, f = cand, xn, fn
        trace.append(f)
        step = min(2.0 * beta, 1e6)
    return FitResult(model, f, it, reason, trace)


@dataclass
class UncertaintySet:
    """Models whose mean NLL exceeds the reference fit by at most ``alpha``.

    With ``alpha_scale="times_n"`` the excess loss is multiplied by the
    sample size before the comparison.
    """

    family: str
    reference_params: ChoiceModel
    reference_loss: float
    alpha: float
    alpha_scale: str = "unscaled"
    num_records: int = 1

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be nonnegative")
        if self.alpha_scale not in ALPHA_SCALES:
            raise ValueError(f"alpha_scale must be one of {ALPHA_SCALES}")

    def excess(self, loss: float) -> float:
        gap = loss - self.reference_loss
        return gap * self.num_records if self.alpha_scale == "times_n" else gap


def membership(uset: UncertaintySet, theta: ChoiceModel, dataset: OfflineDataset,
               catalog: ItemCatalog) -> bool:
    if theta.family != uset.family:
        raise ValueError(f"model family {theta.family} does not match set family {uset.family}")
    loss = _safe_loss(theta, dataset, catalog)
    return bool(np.isfinite(loss) and uset.excess(loss) <= uset.alpha + MEMBERSHIP_SLACK)


def critical_value(D: float, C: float, n: int, delta: float, multiplier: float = 1.0) -> float:
    """Radius ``multiplier * ((D/n) ln(C n / D) + (1/n) ln(1/delta))``."""
    if not D > 0 or not C > 0:
        raise ValueError("D and C must be positive")
    if n < 1 or n < D:
        raise ValueError(f"need n >= D (n={n}, D={D})")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return multiplier * ((D / n) * np.log(C * n / D) + np.log(1.0 / delta) / n)


def empirical_alpha(reference_loss: float) -> float:
    if not np.isfinite(reference_loss):
        raise ValueError("reference loss must be finite")
    return 2.0 * reference_loss


def family_dimension(family: str, dim: int, num_groups: int = 1) -> int:
    """Effective parameter count: d for MNL, Kd + K - 1 for LCL, d + K for NL."""
    if family == "mnl":
        return dim
    if family == "lcl":
        return num_groups * dim + num_groups - 1
    if family == "nl":
        return dim + num_groups
    raise ValueError(f"unknown model family {family!r}")


def family_constant(family: str, bounds: ParamBounds, num_items: int, num_groups: int = 1) -> float:
    cx, ct = bounds.feature_norm_cap, bounds.theta_norm_cap
    if family == "mnl":
        return cx
    if family == "lcl":
        return num_groups * num_items * np.exp(ct * cx)
    if family == "nl":
        return cx * ct * bounds.lambda_cap
    raise ValueError(f"unknown model family {family!r}")


def theoretical_alpha(family: str, catalog: ItemCatalog, n: int, delta: float = 0.05,
                      bounds: ParamBounds = ParamBounds(), num_classes: int = 2,
                      multiplier: float = 1.0) -> float:
    groups = {"mnl": 1, "lcl": num_classes, "nl": max(catalog.num_nests, 1)}[family]
    D = family_dimension(family, catalog.dim, groups)
    C = family_constant(family, bounds, catalog.num_items, groups)
    return critical_value(D, C, n, delta, multiplier)


def build_uncertainty_set(fit: FitResult, dataset: OfflineDataset, alpha: Optional[float] = None,
                          alpha_scale: str = "unscaled") -> UncertaintySet:
    """Uncertainty set around a fit; ``alpha=None`` uses the empirical radius."""
    if alpha is None:
        alpha = empirical_alpha(fit.loss)
    return UncertaintySet(fit.model.family, fit.model, fit.loss, float(alpha),
                          alpha_scale, dataset.size)
