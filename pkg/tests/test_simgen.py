import numpy as np
import pytest
from scipy.special import comb
from scipy.stats import chisquare

from offline_assort.assortment import brute_force
from offline_assort.models import choice_prob_vector
from offline_assort.simgen import (RNG_ALGORITHM, Instance, SamplingPlan, gen_minimax_instance,
                                   gen_mnl_instance, gen_nl_instance, neighbor_models,
                                   sample_dataset)


def test_mnl_instance_deterministic():
    assert gen_mnl_instance(15, 4, 8, 3).to_json() == gen_mnl_instance(15, 4, 8, 3).to_json()
    assert gen_mnl_instance(15, 4, 8, 3).to_json() != gen_mnl_instance(15, 4, 8, 4).to_json()
    assert RNG_ALGORITHM == "numpy.random.PCG64"


def test_mnl_instance_bounds():
    for seed in range(100):
        inst = gen_mnl_instance(10, 3, 5, seed)
        theta0 = inst.true_model.theta
        assert np.linalg.norm(theta0) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(np.linalg.norm(inst.catalog.features, axis=1), 1.0, atol=1e-12)
        assert np.all(inst.catalog.features @ theta0 <= -0.6)
        assert np.all((inst.catalog.revenues >= 5) & (inst.catalog.revenues <= 8))


def test_optimum_matches_oracle():
    for seed in range(15):
        inst = gen_mnl_instance(12, 1 + seed % 6, 4, seed)
        s, v = brute_force(inst.catalog, inst.true_model, inst.space)
        assert s == inst.optimal_assortment and v == pytest.approx(inst.optimal_value, abs=1e-8)
        nl = gen_nl_instance(3, 4, 3, seed, allow_empty_nests=seed % 2 == 0)
        s, v = brute_force(nl.catalog, nl.true_model, nl.space)
        assert s == nl.optimal_assortment and v == pytest.approx(nl.optimal_value, abs=1e-8)


def test_nl_instance_structure():
    inst = gen_nl_instance(4, 5, 3, 7)
    assert [len(g) for g in inst.catalog.nests] == [5] * 4
    lam = inst.true_model.lambdas
    assert np.all((lam >= 0.05) & (lam <= 1))
    assert inst.to_json() == gen_nl_instance(4, 5, 3, 7).to_json()


def test_instance_round_trip():
    inst = gen_nl_instance(2, 3, 2, 1)
    again = Instance.from_dict(inst.to_dict())
    assert again.to_json() == inst.to_json()


def test_full_plan_always_logs_optimum():
    inst = gen_mnl_instance(8, 3, 4, 2)
    data = sample_dataset(inst, 500, SamplingPlan(1.0, 5))
    assert all(s == inst.optimal_assortment for s, _ in data.records)


def test_dataset_deterministic():
    inst = gen_mnl_instance(8, 3, 4, 2)
    a = sample_dataset(inst, 300, SamplingPlan(0.2, 11)).to_jsonl()
    assert a == sample_dataset(inst, 300, SamplingPlan(0.2, 11)).to_jsonl()


def test_optimum_frequency_and_choice_frequencies():
    n, p = 100_000, 0.1
    inst = gen_mnl_instance(15, 4, 8, 0)
    data = sample_dataset(inst, n, SamplingPlan(p, 1))
    s_star = inst.optimal_assortment
    hits = [a for s, a in data.records if s == s_star]
    assert abs(len(hits) - n * p) <= 3 * np.sqrt(n * p * (1 - p))
    probs = choice_prob_vector(inst.true_model, inst.catalog, s_star)
    counts = {k: 0 for k in probs}
    for a in hits:
        counts[a] += 1
    m = len(hits)
    for k, q in probs.items():
        assert abs(counts[k] - m * q) <= 3 * np.sqrt(m * q * (1 - q))


def test_off_optimum_sizes_follow_binomial_weights():
    n = 100_000
    inst = gen_mnl_instance(10, 4, 3, 6)
    data = sample_dataset(inst, n, SamplingPlan(0.05, 2))
    sizes = np.zeros(4)
    for s, _ in data.records:
        if s != inst.optimal_assortment:
            sizes[len(s) - 1] += 1
    w = np.array([comb(10, m) for m in range(1, 5)], dtype=float)
    w[len(inst.optimal_assortment) - 1] -= 1
    assert chisquare(sizes, sizes.sum() * w / w.sum()).pvalue > 0.001


def test_minimax_small_case():
    inst, plan, signs = gen_minimax_instance(2, 4, seed=0)
    np.testing.assert_allclose(inst.catalog.features, np.eye(2) / 2)
    np.testing.assert_allclose(np.abs(inst.true_model.theta), np.sqrt(2))
    np.testing.assert_allclose(np.abs(inst.catalog.features @ inst.true_model.theta), np.sqrt(2) / 2)
    assert plan.p_star == 0.5
    assert list(inst.catalog.revenues) == [1.0, 0.0]
    data = sample_dataset(inst, 4000, plan)
    freq = np.mean([s == (1,) for s, _ in data.records])
    assert abs(freq - 0.5) <= 3 * np.sqrt(0.25 / 4000)
    assert {s for s, _ in data.records} == {(1,), (2,)}


@pytest.mark.parametrize("d,n", [(2, 2), (2, 8), (4, 4), (4, 16)])
def test_minimax_utility_bound(d, n):
    inst, _, signs = gen_minimax_instance(d, n, seed=n)
    assert np.all(np.abs(inst.catalog.features @ inst.true_model.theta) <= 1 + 1e-12)
    for _, a, b in neighbor_models(signs, np.sqrt(d)):
        assert np.all(np.abs(inst.catalog.features @ a.theta) <= 1 + 1e-12)
        assert np.all(np.abs(inst.catalog.features @ b.theta) <= 1 + 1e-12)


def test_generator_errors():
    with pytest.raises(ValueError):
        gen_mnl_instance(3, 4, 2, 0)
    with pytest.raises(ValueError):
        gen_minimax_instance(4, 3, 0)
    with pytest.raises(ValueError):
        SamplingPlan(0.0)
    with pytest.raises(ValueError):
        sample_dataset(gen_mnl_instance(3, 1, 2, 0), 0, SamplingPlan(0.5))
