import numpy as np
import pytest

from offline_assort.data import OfflineDataset
from offline_assort.models import LCL, MNL, NL, ItemCatalog


def unit_rows(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_catalog(rng, n_items, d, nests=None, revenue_high=10.0):
    feats = unit_rows(rng, n_items, d) * rng.uniform(0.2, 1.0, size=(n_items, 1))
    return ItemCatalog(feats, rng.uniform(0.0, revenue_high, n_items), nests)


def contiguous_nests(num_nests, size):
    return [list(range(k * size + 1, (k + 1) * size + 1)) for k in range(num_nests)]


def random_model(family, rng, catalog, scale=1.5, classes=2):
    d = catalog.dim
    if family == "mnl":
        return MNL(scale * rng.standard_normal(d) / np.sqrt(d))
    if family == "lcl":
        w = rng.uniform(0.2, 1.0, classes)
        return LCL(scale * rng.standard_normal((classes, d)) / np.sqrt(d), w / w.sum())
    return NL(scale * rng.standard_normal(d) / np.sqrt(d), rng.uniform(0.2, 1.0, catalog.num_nests))


def random_dataset(rng, catalog, n, model=None):
    records = []
    for _ in range(n):
        size = int(rng.integers(1, catalog.num_items + 1))
        s = sorted(int(j) + 1 for j in rng.choice(catalog.num_items, size, replace=False))
        if model is None:
            a = int(rng.choice([0] + s))
        else:
            from offline_assort.models import choice_prob_vector
            probs = choice_prob_vector(model, catalog, s)
            keys = list(probs)
            p = np.array([probs[k] for k in keys])
            a = int(keys[int(rng.choice(len(keys), p=p / p.sum()))])
        records.append((s, a))
    return OfflineDataset(records, catalog.num_items)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
