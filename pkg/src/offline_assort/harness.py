"""
Seeded experiment runner comparing the pessimistic solver with the plug-in baseline.

Each trial draws one instance from ``mix_seed(base_seed, trial)`` and, for every
sample size ``n``, one dataset from ``mix_seed(instance_seed, n)``; both methods
share the fitted model and the dataset. Results are sorted by (n, trial,
method) before writing, so output does not depend on worker scheduling.
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .core import PastaConfig, as_if_solve, pasta_solve
from .estimate import FitConfig, fit_mle, theoretical_alpha
from .models import expected_revenue
from .simgen import Instance, SamplingPlan, gen_mnl_instance, gen_nl_instance, sample_dataset

WORKERS_ENV = "OFFLINE_ASSORT_WORKERS"
TRIAL_COLUMNS = ["method", "n", "p", "d", "trial", "seed", "regret", "accuracy", "wall_time"]
SUMMARY_COLUMNS = ["method", "n", "p", "d", "trials", "errors", "regret_mean", "regret_std",
                   "accuracy_mean", "accuracy_std"]
METHODS = ("pasta", "as_if")
_MASK64 = (1 << 64) - 1


def mix_seed(base: int, index: int) -> int:
    """SplitMix64 finalizer applied to ``base + golden * (index + 1)``."""
    z = (int(base) + 0x9E3779B97F4A7C15 * (int(index) + 1)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass
class ExperimentConfig:
    scenario: dict  # {"family": "mnl", "N", "K", "d"} or {"family": "nl", "K", "kappa", "d"}
    p_star: float = 0.1
    sample_sizes: list = field(default_factory=lambda: [1000])
    num_trials: int = 50
    alpha_mode: str = "empirical"  # or "theoretical"
    alpha_scale: str = "unscaled"
    alpha_multiplier: float = 1.0
    delta: float = 0.05
    base_seed: int = 0
    pasta: dict = field(default_factory=dict)  # PastaConfig overrides

    def __post_init__(self):
        if self.num_trials < 1:
            raise ValueError("num_trials must be >= 1")
        if not self.sample_sizes or any(int(n) < 1 for n in self.sample_sizes):
            raise ValueError("sample sizes must be positive")
        if self.alpha_mode not in ("empirical", "theoretical"):
            raise ValueError("alpha_mode must be 'empirical' or 'theoretical'")
        if self.scenario.get("family") not in ("mnl", "nl"):
            raise ValueError("scenario family must be 'mnl' or 'nl'")
        if not 0 < self.p_star <= 1:
            raise ValueError("p_star must lie in (0, 1]")
        self.sample_sizes = [int(n) for n in self.sample_sizes]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def pasta_config(self, seed: int, alpha: Optional[float]) -> PastaConfig:
        opts = dict(self.pasta)
        opts.update(alpha=alpha, alpha_scale=self.alpha_scale, seed=seed)
        return PastaConfig(**opts)


@dataclass
class TrialResult:
    method: str
    n: int
    p: float
    d: int
    trial: int
    seed: int
    regret: float
    accuracy: float
    wall_time: float
    error: Optional[str] = None


def regret(instance: Instance, s_hat) -> float:
    s_hat = tuple(sorted(s_hat))
    if not instance.space.contains(s_hat, instance.catalog):
        raise ValueError(f"assortment {list(s_hat)} is outside the instance's space")
    gap = instance.optimal_value - expected_revenue(instance.true_model, instance.catalog, s_hat)
    if gap < -1e-10:
        raise ValueError(f"assortment beats the certified optimum by {-gap}")
    return max(0.0, float(gap))


def accuracy(s_hat, s_star) -> float:
    s_hat, s_star = set(s_hat), set(s_star)
    if not s_hat or not s_star:
        raise ValueError("assortments must be nonempty")
    return len(s_hat & s_star) / len(s_star)


def make_instance(config: ExperimentConfig, seed: int) -> Instance:
    sc = config.scenario
    if sc["family"] == "mnl":
        return gen_mnl_instance(int(sc["N"]), int(sc["K"]), int(sc["d"]), seed)
    return gen_nl_instance(int(sc["K"]), int(sc["kappa"]), int(sc["d"]), seed,
                           allow_empty_nests=bool(sc.get("allow_empty_nests", True)))


def run_trial(config: ExperimentConfig, trial_index: int, n: Optional[int] = None):
    """One paired trial; returns ``(pasta_result, as_if_result)``.

    Failures are recorded in the ``error`` field rather than raised.
    """
    n = config.sample_sizes[0] if n is None else int(n)
    family = config.scenario["family"]
    d = int(config.scenario["d"])
    seed = mix_seed(config.base_seed, trial_index)
    data_seed = mix_seed(seed, n)
    common = dict(n=n, p=config.p_star, d=d, trial=trial_index, seed=seed)
    try:
        start = time.perf_counter()
        instance = make_instance(config, seed)
        dataset = sample_dataset(instance, n, SamplingPlan(config.p_star, data_seed))
        pcfg = config.pasta_config(data_seed, None)
        fit_cfg = FitConfig(**{**pcfg.fit.__dict__, "bounds": pcfg.bounds})
        fit = fit_mle(family, dataset, instance.catalog, None, fit_cfg)
        fit_time = time.perf_counter() - start

        t0 = time.perf_counter()
        s_base, _ = as_if_solve(dataset, instance.catalog, family, instance.space, pcfg, fit)
        base_time = fit_time + time.perf_counter() - t0

        t0 = time.perf_counter()
        alpha = None
        if config.alpha_mode == "theoretical":
            alpha = theoretical_alpha(family, instance.catalog, n, config.delta, pcfg.bounds,
                                      multiplier=config.alpha_multiplier)
        pcfg = config.pasta_config(data_seed, alpha)
        res = pasta_solve(dataset, instance.catalog, family, instance.space, pcfg, fit)
        pasta_time = fit_time + time.perf_counter() - t0

        s_star = instance.optimal_assortment
        return (TrialResult("pasta", regret=regret(instance, res.assortment),
                            accuracy=accuracy(res.assortment, s_star), wall_time=pasta_time, **common),
                TrialResult("as_if", regret=regret(instance, s_base),
                            accuracy=accuracy(s_base, s_star), wall_time=base_time, **common))
    except Exception as exc:  # recorded per trial; the batch continues
        msg = f"{type(exc).__name__}: {exc}"
        return tuple(TrialResult(m, regret=float("nan"), accuracy=float("nan"), wall_time=0.0,
                                 error=msg, **common) for m in METHODS)


def _run_unit(args):
    config_dict, trial, n = args
    return run_trial(ExperimentConfig.from_dict(config_dict), trial, n)


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    return max(1, int(value)) if value else 1


def run_trials(config: ExperimentConfig, workers: Optional[int] = None) -> list:
    workers = default_workers() if workers is None else max(1, int(workers))
    units = [(config.to_dict(), t, n) for n in config.sample_sizes for t in range(config.num_trials)]
    if workers == 1:
        pairs = [_run_unit(u) for u in units]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(_run_unit, units))
    rows = [r for pair in pairs for r in pair]
    order = {m: i for i, m in enumerate(METHODS)}
    return sorted(rows, key=lambda r: (r.n, r.trial, order[r.method]))


def summarize(rows: list) -> list:
    """Per (method, n): trial count, error count, mean and std of regret and accuracy."""
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.method, r.n), []).append(r)
    order = {m: i for i, m in enumerate(METHODS)}
    out = []
    for (method, n) in sorted(cells, key=lambda k: (k[1], order[k[0]])):
        group = cells[(method, n)]
        ok = [r for r in group if r.error is None]
        reg = np.array([r.regret for r in ok])
        acc = np.array([r.accuracy for r in ok])
        ddof = 1 if len(ok) > 1 else 0
        out.append({
            "method": method, "n": n, "p": group[0].p, "d": group[0].d,
            "trials": len(ok), "errors": len(group) - len(ok),
            "regret_mean": float(reg.mean()) if ok else float("nan"),
            "regret_std": float(reg.std(ddof=ddof)) if ok else float("nan"),
            "accuracy_mean": float(acc.mean()) if ok else float("nan"),
            "accuracy_std": float(acc.std(ddof=ddof)) if ok else float("nan"),
        })
    return out


def win_rate(rows: list, n: int) -> float:
    """Share of trials at size ``n`` where the pessimistic solver has strictly lower regret."""
    by_trial: dict = {}
    for r in rows:
        if r.n == n and r.error is None:
            by_trial.setdefault(r.trial, {})[r.method] = r.regret
    pairs = [v for v in by_trial.values() if len(v) == 2]
    if not pairs:
        return float("nan")
    return sum(v["pasta"] < v["as_if"] for v in pairs) / len(pairs)


def _csv(rows: list, columns: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def trials_csv(rows: list) -> str:
    return _csv([asdict(r) for r in rows], TRIAL_COLUMNS)


def summary_csv(summary: list) -> str:
    return _csv(summary, SUMMARY_COLUMNS)


def run_experiment(config: ExperimentConfig, out_dir: Optional[str] = None,
                   workers: Optional[int] = None) -> list:
    """Run every (n, trial) cell, optionally write CSVs, return the summary rows."""
    rows = run_trials(config, workers)
    summary = summarize(rows)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "trials.csv"), "w") as fh:
            fh.write(trials_csv(rows))
        with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
            fh.write(summary_csv(summary))
        errors = [r for r in rows if r.error is not None]
        if errors:
            with open(os.path.join(out_dir, "errors.csv"), "w") as fh:
                fh.write(_csv([asdict(r) for r in errors], ["method", "n", "trial", "seed", "error"]))
    return summary
