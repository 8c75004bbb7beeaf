"""Command-line entry point: generate, minimax-instance, estimate, solve, experiment."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .assortment import (CardinalityCapped, NestedPrefixFree, Unconstrained, optimize,
                         space_from_dict)
from .core import PastaConfig, as_if_solve, pasta_solve
from .data import OfflineDataset
from .estimate import FitConfig, empirical_alpha, fit_mle, theoretical_alpha
from .harness import ExperimentConfig, run_experiment, summary_csv
from .models import FAMILIES, ItemCatalog, expected_revenue, model_from_dict
from .simgen import (RNG_ALGORITHM, Instance, SamplingPlan, gen_minimax_instance,
                     gen_mnl_instance, gen_nl_instance, sample_dataset)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _read_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _load_catalog(path: str):
    """Catalog plus the space stored alongside it (instance files carry one)."""
    data = _read_json(path)
    if "catalog" in data:
        space = space_from_dict(data["space"]) if "space" in data else None
        return ItemCatalog.from_dict(data["catalog"]), space
    return ItemCatalog.from_dict(data), None


def _load_dataset(path: str, catalog: ItemCatalog) -> OfflineDataset:
    with open(path) as fh:
        return OfflineDataset.from_jsonl(fh.read(), catalog.num_items)


def _pick_space(args, catalog, stored):
    if getattr(args, "cap", None):
        return CardinalityCapped(args.cap)
    if stored is not None:
        return stored
    if catalog.nests is not None:
        return NestedPrefixFree()
    return Unconstrained()


def _instance_doc(instance: Instance, meta: dict) -> dict:
    doc = instance.to_dict()
    doc["metadata"] = {"rng": RNG_ALGORITHM, **meta}
    return doc


def cmd_generate(args) -> int:
    if args.family == "mnl":
        instance = gen_mnl_instance(args.N, args.K, args.d, args.seed)
        meta = {"family": "mnl", "N": args.N, "K": args.K, "d": args.d}
    else:
        instance = gen_nl_instance(args.K, args.kappa, args.d, args.seed)
        meta = {"family": "nl", "K": args.K, "kappa": args.kappa, "d": args.d}
    meta.update(seed=args.seed, n=args.n, p_star=args.p_star)
    _write(args.instance, _dump(_instance_doc(instance, meta)))
    if args.n:
        dataset = sample_dataset(instance, args.n, SamplingPlan(args.p_star, args.seed))
        _write(args.dataset, dataset.to_jsonl())
    return 0


def cmd_minimax(args) -> int:
    instance, plan, signs = gen_minimax_instance(args.d, args.n, args.seed)
    meta = {"d": args.d, "n": args.n, "seed": args.seed, "signs": signs.tolist(),
            "p_star": plan.p_star}
    _write(args.instance, _dump(_instance_doc(instance, meta)))
    if args.dataset:
        _write(args.dataset, sample_dataset(instance, args.n, plan).to_jsonl())
    return 0


def _fit_config(args) -> FitConfig:
    return FitConfig(num_classes=args.classes, seed=args.seed)


def cmd_estimate(args) -> int:
    catalog, _ = _load_catalog(args.catalog)
    dataset = _load_dataset(args.dataset, catalog)
    fit = fit_mle(args.family, dataset, catalog, None, _fit_config(args))
    if args.alpha_mode == "empirical":
        alpha = empirical_alpha(fit.loss)
    else:
        alpha = theoretical_alpha(args.family, catalog, dataset.size, args.delta,
                                  num_classes=args.classes)
    doc = fit.model.to_dict()
    doc["fit"] = {"loss": fit.loss, "iterations": fit.iterations, "termination": fit.reason,
                  "n": dataset.size, "alpha": alpha, "alpha_mode": args.alpha_mode,
                  "seed": args.seed}
    _write(args.out, _dump(doc))
    return 0


def cmd_solve(args) -> int:
    catalog, stored = _load_catalog(args.catalog)
    space = _pick_space(args, catalog, stored)
    if args.method is None:
        if not args.model:
            raise SystemExit("solve: --model is required without --method")
        model = model_from_dict(_read_json(args.model))
        s, value = optimize(catalog, model, space)
        doc = {"assortment": list(s), "value": value}
    else:
        if not args.dataset or not args.family:
            raise SystemExit("solve: --method needs --dataset and --family")
        dataset = _load_dataset(args.dataset, catalog)
        cfg = PastaConfig(max_outer_iters=args.T, gdls_steps=args.gdls_steps, alpha=args.alpha,
                          alpha_scale=args.alpha_scale, seed=args.seed,
                          fit=FitConfig(num_classes=args.classes, seed=args.seed))
        if args.method == "as-if":
            s, value = as_if_solve(dataset, catalog, args.family, space, cfg)
            doc = {"method": "as-if", "assortment": list(s), "value": value}
        else:
            res = pasta_solve(dataset, catalog, args.family, space, cfg)
            doc = {"method": "pasta", "assortment": list(res.assortment),
                   "worst_case_value": res.worst_case_value,
                   "reference_value": expected_revenue(res.uncertainty_set.reference_params,
                                                       catalog, res.assortment),
                   "alpha": res.uncertainty_set.alpha, "iterations": res.iterations,
                   "worst_case_params": res.worst_case_params.to_dict()}
    _write(args.out, _dump(doc))
    return 0


def cmd_experiment(args) -> int:
    config = ExperimentConfig.from_dict(_read_json(args.config))
    if args.trials is not None:
        config.num_trials = args.trials
    summary = run_experiment(config, args.out_dir, args.workers)
    sys.stdout.write(summary_csv(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="offline-assort",
                                     description="Pessimistic offline assortment optimization")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthetic instance and logged dataset")
    g.add_argument("--family", choices=["mnl", "nl"], default="mnl")
    g.add_argument("--N", type=int, default=15, help="items (mnl)")
    g.add_argument("--K", type=int, default=4, help="cardinality cap (mnl) or nest count (nl)")
    g.add_argument("--kappa", type=int, default=5, help="items per nest (nl)")
    g.add_argument("--d", type=int, default=8)
    g.add_argument("--n", type=int, default=0, help="records to sample (0: none)")
    g.add_argument("--p-star", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--instance", default="-", help="instance JSON path ('-' for stdout)")
    g.add_argument("--dataset", default=None, help="dataset JSON-lines path")
    g.set_defaults(func=cmd_generate)

    m = sub.add_parser("minimax-instance", help="lower-bound construction")
    m.add_argument("--d", type=int, required=True)
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--instance", default="-")
    m.add_argument("--dataset", default=None)
    m.set_defaults(func=cmd_minimax)

    e = sub.add_parser("estimate", help="maximum-likelihood fit")
    e.add_argument("--catalog", required=True, help="catalog or instance JSON")
    e.add_argument("--dataset", required=True)
    e.add_argument("--family", choices=FAMILIES, default="mnl")
    e.add_argument("--classes", type=int, default=2, help="latent classes (lcl)")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--alpha-mode", choices=["empirical", "theoretical"], default="empirical")
    e.add_argument("--delta", type=float, default=0.05)
    e.add_argument("--out", default="-")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("solve", help="optimize an assortment")
    s.add_argument("--catalog", required=True, help="catalog or instance JSON")
    s.add_argument("--model", help="model JSON (known-model optimization)")
    s.add_argument("--cap", type=int, default=None, help="cardinality cap")
    s.add_argument("--method", choices=["pasta", "as-if"], default=None)
    s.add_argument("--dataset")
    s.add_argument("--family", choices=FAMILIES)
    s.add_argument("--classes", type=int, default=2)
    s.add_argument("--alpha", type=float, default=None, help="radius (default: empirical)")
    s.add_argument("--alpha-scale", choices=["unscaled", "times_n"], default="unscaled")
    s.add_argument("--T", type=int, default=30)
    s.add_argument("--gdls-steps", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_solve)

    x = sub.add_parser("experiment", help="seeded comparison study")
    x.add_argument("--config", required=True)
    x.add_argument("--out-dir", default=None)
    x.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $OFFLINE_ASSORT_WORKERS or 1)")
    x.add_argument("--trials", type=int, default=None)
    x.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.seterr(over="ignore", under="ignore")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
