"""
Pessimistic (max-min) assortment selection and the plug-in baseline.

The max-min problem is attacked by alternating two steps: pick the best
assortment for the current parameter (exact optimizer), then move the
parameter inside the uncertainty set to lower that assortment's revenue
(a few gradient steps with a feasibility-restoring line search). The best
worst-case value seen across iterations is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assortment import optimize, sample_from_space
from .data import OfflineDataset
from .estimate import (FitConfig, FitResult, UncertaintySet, build_uncertainty_set,
                       fit_mle, membership)
from .models import ChoiceModel, ItemCatalog, ParamBounds, expected_revenue, value_gradient


class InfeasibleStartError(ValueError):
    """Descent was started from a parameter outside the uncertainty set."""


@dataclass(frozen=True)
class PastaConfig:
    max_outer_iters: int = 30
    gdls_steps: int = 3
    initial_step: float = 0.01
    shrink_factor: float = 0.2
    line_search_cap: int = 60
    alpha: Optional[float] = None  # None: twice the fitted loss
    alpha_scale: str = "unscaled"
    seed: int = 0
    bounds: ParamBounds = field(default_factory=ParamBounds)
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.gdls_steps < 0:
            raise ValueError("gdls_steps must be >= 0")
        if not 0 < self.shrink_factor < 1:
            raise ValueError("shrink_factor must lie in (0, 1)")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.line_search_cap < 1:
            raise ValueError("line_search_cap must be >= 1")
        if self.alpha is not None and not self.alpha >= 0:
            raise ValueError("alpha must be nonnegative")


@dataclass
class PastaResult:
    assortment: tuple
    worst_case_params: ChoiceModel
    worst_case_value: float
    trace: list  # (assortment, post-descent value) per outer iteration
    initial_assortment: tuple
    uncertainty_set: UncertaintySet
    iterations: int


def gdls(s, uset: UncertaintySet, theta_init: ChoiceModel, dataset: OfflineDataset,
         catalog: ItemCatalog, config: PastaConfig = PastaConfig()) -> ChoiceModel:
    """Lower ``V(s; theta)`` inside the uncertainty set by line-searched gradient steps.

    A step is accepted only if the candidate stays within the parameter
    bounds, is a member of ``uset`` and does not raise the revenue; after
    ``line_search_cap`` shrinks without success the step is skipped.
    """
    if not membership(uset, theta_init, dataset, catalog):
        raise InfeasibleStartError("initial parameter is not in the uncertainty set")
    theta = theta_init
    value = expected_revenue(theta, catalog, s)
    for _ in range(config.gdls_steps):
        direction = theta.tangent(value_gradient(theta, catalog, s))
        if not np.any(direction):
            break
        x = theta.params()
        beta = config.initial_step
        for _ in range(config.line_search_cap + 1):
            cand = theta.with_params(x - beta * direction)
            if cand.in_bounds(config.bounds):
                cand_value = expected_revenue(cand, catalog, s)
                if cand_value <= value and membership(uset, cand, dataset, catalog):
                    theta, value = cand, cand_value
                    break
            beta *= config.shrink_factor
    return theta


def _fit(dataset, catalog, family, config: PastaConfig) -> FitResult:
    fit_config = config.fit
    if fit_config.bounds != config.bounds:
        fit_config = FitConfig(**{**fit_config.__dict__, "bounds": config.bounds})
    return fit_mle(family, dataset, catalog, None, fit_config)


def pasta_solve(dataset: OfflineDataset, catalog: ItemCatalog, family: str, space,
                config: PastaConfig = PastaConfig(), fit: Optional[FitResult] = None) -> PastaResult:
    """Alternate assortment optimization and worst-case descent; keep the best pair."""
    if fit is None:
        fit = _fit(dataset, catalog, family, config)
    uset = build_uncertainty_set(fit, dataset, config.alpha, config.alpha_scale)
    rng = np.random.default_rng(config.seed)
    s0 = sample_from_space(space, catalog, rng)

    theta = fit.model
    trace = []
    best = None
    seen = set()
    for t in range(1, config.max_outer_iters + 1):
        s, _ = optimize(catalog, theta, space)
        theta = gdls(s, uset, theta, dataset, catalog, config)
        value = expected_revenue(theta, catalog, s)
        trace.append((s, value))
        if best is None or value > best[2]:
            best = (s, theta, value)
        key = (s, theta.params().tobytes())
        if key in seen:
            break
        seen.add(key)
    return PastaResult(best[0], best[1], best[2], trace, s0, uset, t)


def as_if_solve(dataset: OfflineDataset, catalog: ItemCatalog, family: str, space,
                config: PastaConfig = PastaConfig(), fit: Optional[FitResult] = None):
    """Fit the model, then optimize as if the fit were the truth."""
    if fit is None:
        fit = _fit(dataset, catalog, family, config)
    return optimize(catalog, fit.model, space)
