import numpy as np
import pytest

from conftest import random_catalog, random_dataset
from offline_assort.assortment import CardinalityCapped, ExplicitSpace, Unconstrained, brute_force
from offline_assort.core import InfeasibleStartError, PastaConfig, as_if_solve, gdls, pasta_solve
from offline_assort.data import OfflineDataset
from offline_assort.estimate import FitConfig, UncertaintySet, fit_mle, membership
from offline_assort.models import LCL, MNL, ItemCatalog, ParamBounds, expected_revenue, nll
from offline_assort.simgen import SamplingPlan, gen_mnl_instance, gen_two_item_instance, sample_dataset


def small_case(seed, n=300, p_star=0.3):
    inst = gen_mnl_instance(6, 2, 3, seed)
    data = sample_dataset(inst, n, SamplingPlan(p_star, seed + 1))
    return inst, data


def collapse_mismatches(seeds):
    bad = []
    for seed in seeds:
        inst, data = small_case(seed)
        cfg = PastaConfig(alpha=0.0, seed=seed)
        fit = fit_mle("mnl", data, inst.catalog)
        res = pasta_solve(data, inst.catalog, "mnl", inst.space, cfg, fit)
        base, _ = as_if_solve(data, inst.catalog, "mnl", inst.space, cfg, fit)
        if res.assortment != base:
            bad.append((seed, res.assortment, base))
    return bad


def test_no_steps_returns_start():
    inst, data = small_case(1)
    fit = fit_mle("mnl", data, inst.catalog)
    uset = UncertaintySet("mnl", fit.model, fit.loss, 1.0)
    out = gdls((1, 2), uset, fit.model, data, inst.catalog, PastaConfig(gdls_steps=0))
    assert out is fit.model


def test_zero_radius_rejects_every_step():
    inst, data = small_case(2)
    fit = fit_mle("mnl", data, inst.catalog)
    uset = UncertaintySet("mnl", fit.model, fit.loss, 0.0)
    out = gdls(inst.optimal_assortment, uset, fit.model, data, inst.catalog, PastaConfig(gdls_steps=5))
    # only moves inside the 1e-12 membership slack can pass
    assert nll(out, data, inst.catalog) - fit.loss <= 1e-12
    assert np.linalg.norm(out.params() - fit.model.params()) <= 1e-5


def test_large_radius_reaches_grid_minimum():
    cat = ItemCatalog([[1.0]], [1.0])
    data = OfflineDataset([((1,), 1), ((1,), 0), ((1,), 0)], 1)
    bounds = ParamBounds(theta_norm_cap=2.0)
    fit = fit_mle("mnl", data, cat, MNL([0.0]), FitConfig(bounds=bounds))
    uset = UncertaintySet("mnl", fit.model, fit.loss, 1e3)
    cfg = PastaConfig(gdls_steps=300, initial_step=1.0, bounds=bounds)
    out = gdls((1,), uset, fit.model, data, cat, cfg)
    grid = np.linspace(-2, 2, 10_000)
    feasible = [t for t in grid if nll(MNL([t]), data, cat) - fit.loss <= 1e3]
    floor = min(expected_revenue(MNL([t]), cat, (1,)) for t in feasible)
    assert expected_revenue(out, cat, (1,)) <= floor + 1e-3


def test_infeasible_start_is_reported():
    inst, data = small_case(3)
    fit = fit_mle("mnl", data, inst.catalog)
    uset = UncertaintySet("mnl", fit.model, fit.loss, 0.0)
    with pytest.raises(InfeasibleStartError):
        gdls((1,), uset, MNL(fit.model.theta + 0.5), data, inst.catalog)


def test_gdls_descends_and_stays_feasible():
    for seed in range(5):
        inst, data = small_case(10 + seed, n=200)
        fit = fit_mle("mnl", data, inst.catalog)
        uset = UncertaintySet("mnl", fit.model, fit.loss, 0.05)
        theta = fit.model
        s = inst.optimal_assortment
        for _ in range(4):
            nxt = gdls(s, uset, theta, data, inst.catalog, PastaConfig(gdls_steps=1))
            assert membership(uset, nxt, data, inst.catalog)
            assert expected_revenue(nxt, inst.catalog, s) <= expected_revenue(theta, inst.catalog, s) + 1e-12
            theta = nxt


def test_alpha_zero_collapses_to_plug_in():
    assert collapse_mismatches(range(100, 106)) == []


def test_result_invariants():
    for seed in range(4):
        inst, data = small_case(20 + seed, n=150, p_star=0.1)
        res = pasta_solve(data, inst.catalog, "mnl", inst.space, PastaConfig(seed=seed))
        uset = res.uncertainty_set
        assert membership(uset, res.worst_case_params, data, inst.catalog)
        v = expected_revenue(res.worst_case_params, inst.catalog, res.assortment)
        assert res.worst_case_value == pytest.approx(v, abs=1e-10)
        assert res.worst_case_value <= expected_revenue(uset.reference_params, inst.catalog,
                                                        res.assortment) + 1e-12
        assert res.worst_case_value == max(value for _, value in res.trace)
        assert inst.space.contains(res.assortment, inst.catalog)
        assert inst.space.contains(res.initial_assortment, inst.catalog)
        assert 1 <= res.iterations <= 30


def test_singleton_data_incumbent_is_best_visited():
    inst = gen_two_item_instance()
    data = OfflineDataset([((1,), 1), ((1,), 0), ((2,), 2), ((2,), 0)] * 5, 2)
    init = LCL([[0.3, -0.2], [-0.1, 0.4]], [0.5, 0.5])
    fit = fit_mle("lcl", data, inst.catalog, init)
    cfg = PastaConfig(alpha=0.05, gdls_steps=5)
    res = pasta_solve(data, inst.catalog, "lcl", Unconstrained(), cfg, fit)
    worst = {}
    for s, v in res.trace:
        worst[s] = max(worst.get(s, -np.inf), v)
    assert res.worst_case_value == max(worst.values())
    if (2,) in worst:
        assert res.worst_case_value >= worst[(2,)]


def test_deterministic():
    inst, data = small_case(5)
    a = pasta_solve(data, inst.catalog, "mnl", inst.space, PastaConfig(seed=9))
    b = pasta_solve(data, inst.catalog, "mnl", inst.space, PastaConfig(seed=9))
    assert a.assortment == b.assortment and a.trace == b.trace
    assert np.array_equal(a.worst_case_params.params(), b.worst_case_params.params())
    assert a.initial_assortment == b.initial_assortment


def test_as_if_matches_brute_force_under_fit():
    rng = np.random.default_rng(12)
    for _ in range(5):
        cat = random_catalog(rng, 7, 2)
        data = random_dataset(rng, cat, 200)
        fit = fit_mle("mnl", data, cat)
        space = CardinalityCapped(3)
        assert as_if_solve(data, cat, "mnl", space) == brute_force(cat, fit.model, space)


def test_explicit_space_uses_brute_force():
    inst, data = small_case(6)
    space = ExplicitSpace(((1,), (2, 3), (4, 5, 6)))
    res = pasta_solve(data, inst.catalog, "mnl", space, PastaConfig())
    assert res.assortment in space.assortments


def test_config_validation():
    for bad in (dict(max_outer_iters=0), dict(gdls_steps=-1), dict(shrink_factor=1.0),
                dict(initial_step=0.0), dict(line_search_cap=0), dict(alpha=-1.0)):
        with pytest.raises(ValueError):
            PastaConfig(**bad)
