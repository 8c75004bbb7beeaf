import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import contiguous_nests, random_catalog, random_model
from offline_assort.metrics import (AssortmentDistribution, generalized_hellinger_sq,
                                    hellinger_sq, hellinger_sq_many, hellinger_sq_probs,
                                    kl_divergence, total_variation)
from offline_assort.models import MNL, ItemCatalog, choice_prob_vector
from offline_assort.simgen import gen_minimax_instance, neighbor_models

SLACK = 1e-10


def prob_list(model, catalog, s):
    p = choice_prob_vector(model, catalog, s)
    return np.array([p[k] for k in [0, *s]])


def direct_hellinger(a, b):
    total = 0.0
    for x, y in zip(a, b):
        total += (x ** 0.5 - y ** 0.5) ** 2
    return total / 2


def random_assortments(rng, n_items, count):
    out = set()
    while len(out) < count:
        size = int(rng.integers(1, n_items + 1))
        out.add(tuple(sorted(int(j) + 1 for j in rng.choice(n_items, size, replace=False))))
    return sorted(out)


def lemma_violations(seed=0, pairs=1000):
    """Count violations of the distance inequalities over random model pairs."""
    rng = np.random.default_rng(seed)
    counts = dict(tv=0, l1=0, kl=0, mixture=0, lipschitz=0)
    families = ["mnl", "lcl", "nl"]
    for i in range(pairs):
        cat = random_catalog(rng, 6, 3, nests=contiguous_nests(2, 3))
        fam = families[i % 3]
        p1 = random_model(fam, rng, cat, scale=2.0)
        p2 = random_model(fam, rng, cat, scale=2.0)
        support = random_assortments(rng, 6, 4)
        w = rng.uniform(0.1, 1.0, 4)
        pi = AssortmentDistribution(tuple(zip(support, w / w.sum())))
        h2 = hellinger_sq_many(p1, p2, cat, support)
        big_h2 = float(pi.masses @ h2)
        l1_sq, kl = 0.0, 0.0
        for s, mass, h2_s in zip(support, pi.masses, h2):
            if total_variation(p1, p2, cat, s) > np.sqrt(2 * h2_s) + SLACK:
                counts["tv"] += 1
            a, b = prob_list(p1, cat, s), prob_list(p2, cat, s)
            l1_sq += mass * np.abs(a - b).sum() ** 2
            kl += mass * kl_divergence(p2, p1, cat, s)
            lam = rng.uniform(0, 1)
            q = (1 - lam) * a + lam * b
            hq = hellinger_sq_probs(q, b)
            if not ((1 - lam) ** 2 / 4 * h2_s - SLACK <= hq <= (1 - lam) * h2_s + SLACK):
                counts["mixture"] += 1
        if l1_sq > 8 * big_h2 + SLACK:
            counts["l1"] += 1
        if 2 * big_h2 > kl + SLACK:
            counts["kl"] += 1
        if fam == "mnl":
            cx = np.linalg.norm(cat.features, axis=1).max()
            bound = 9 * cx ** 2 / 8 * np.sum((p1.theta - p2.theta) ** 2)
            if np.any(h2 > bound + SLACK):
                counts["lipschitz"] += 1
    return counts


def test_identical_models_zero():
    rng = np.random.default_rng(0)
    cat = random_catalog(rng, 4, 2)
    m = random_model("mnl", rng, cat)
    assert hellinger_sq(m, m, cat, (1, 3)) == 0
    assert total_variation(m, m, cat, (1, 3)) == 0
    assert kl_divergence(m, m, cat, (1, 3)) == 0


def test_point_mass_against_uniform():
    expected = 0.5 * ((1 - np.sqrt(0.5)) ** 2 + 0.5)
    assert expected == pytest.approx(1 - 1 / np.sqrt(2), abs=1e-15)
    assert hellinger_sq_probs(np.array([0.0, 1.0]), np.array([0.5, 0.5])) == pytest.approx(expected, abs=1e-15)
    cat = ItemCatalog([[1.0]], [1.0])
    sure = MNL([800.0])  # no-purchase mass underflows to zero
    even = MNL([0.0])
    assert hellinger_sq(sure, even, cat, (1,)) == pytest.approx(expected, abs=1e-14)


def test_matches_direct_summation():
    rng = np.random.default_rng(7)
    for i in range(200):
        cat = random_catalog(rng, 5, 3, nests=[[1, 2], [3, 4, 5]])
        fam = ["mnl", "lcl", "nl"][i % 3]
        p1, p2 = random_model(fam, rng, cat), random_model(fam, rng, cat)
        s = random_assortments(rng, 5, 1)[0]
        a, b = prob_list(p1, cat, s), prob_list(p2, cat, s)
        assert hellinger_sq(p1, p2, cat, s) == pytest.approx(direct_hellinger(a, b), abs=1e-14)
        assert hellinger_sq(p1, p2, cat, s) == pytest.approx(hellinger_sq(p2, p1, cat, s), abs=1e-15)
        tv = sum(abs(x - y) for x, y in zip(a, b)) / 2
        assert total_variation(p1, p2, cat, s) == pytest.approx(tv, abs=1e-14)
        kl = sum(x * np.log(x / y) for x, y in zip(a, b))
        assert kl_divergence(p1, p2, cat, s) == pytest.approx(kl, abs=1e-14)


def test_generalized_hellinger():
    rng = np.random.default_rng(3)
    cat = random_catalog(rng, 4, 2)
    p1, p2 = random_model("mnl", rng, cat), random_model("mnl", rng, cat)
    one = AssortmentDistribution((((2, 3), 1.0),))
    assert generalized_hellinger_sq(p1, p2, cat, one) == hellinger_sq(p1, p2, cat, (2, 3))
    assert generalized_hellinger_sq(p1, p1, cat, one) == 0
    two = AssortmentDistribution((((1,), 0.25), ((2, 4), 0.75)))
    by_hand = 0.25 * hellinger_sq(p1, p2, cat, (1,)) + 0.75 * hellinger_sq(p1, p2, cat, (2, 4))
    assert generalized_hellinger_sq(p1, p2, cat, two) == pytest.approx(by_hand, abs=1e-15)


def test_distribution_validation():
    with pytest.raises(ValueError):
        AssortmentDistribution((((1,), 0.5), ((1,), 0.5)))
    with pytest.raises(ValueError):
        AssortmentDistribution((((1,), 0.5),))
    with pytest.raises(ValueError):
        AssortmentDistribution((((1,), 1.5), ((2,), -0.5)))
    u = AssortmentDistribution.uniform([(1,), (2,), (3,)])
    assert u.masses.sum() == pytest.approx(1.0, abs=1e-15)


def test_kl_support_violation():
    cat = ItemCatalog([[1.0]], [1.0])
    with pytest.raises(ValueError):
        kl_divergence(MNL([0.0]), MNL([-np.inf]), cat, (1,))


def test_lemma_inequalities_hold():
    assert lemma_violations(seed=11, pairs=300) == dict(tv=0, l1=0, kl=0, mixture=0, lipschitz=0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
       st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3))
def test_hellinger_bounds(a, b):
    a, b = np.array(a) / sum(a), np.array(b) / sum(b)
    h = hellinger_sq_probs(a, b)
    assert 0 <= h <= 1
    assert h == pytest.approx(hellinger_sq_probs(b, a), abs=1e-15)


@pytest.mark.parametrize("d,n", [(2, 2), (2, 8), (4, 4), (4, 16)])
def test_minimax_singleton_kl(d, n):
    inst, _, signs = gen_minimax_instance(d, n, seed=d * n)
    for i, mv, mw in neighbor_models(signs, np.sqrt(d)):
        x = inst.catalog.features[i - 1]
        bound = (x @ mv.theta - x @ mw.theta) ** 2
        for j in range(1, d + 1):
            assert kl_divergence(mv, mw, inst.catalog, (j,)) <= bound + SLACK
