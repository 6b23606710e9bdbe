"""Command-line entry point.

Subcommands: build | score | grid | nas | report. Every output file gets a
metadata sidecar (seed, config hash, tool version) and is byte-identical
when rerun with the same config and seed. Exit codes: 0 ok, 2 config
error, 3 runtime error; failures print one machine-readable JSON line to
stderr."""

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .budget import BudgetLedger
from .configio import (
    apply_overrides,
    config_hash,
    cost_from,
    dataset_from,
    grid_from,
    hpo_from,
    load_config,
    nas_from,
    space_from,
    train_from,
)
from .errors import ConfigError, PredbenchError
from .harness import ResultGrid, StoreView, pareto_best, run_grid
from .metrics import METRIC_NAMES
from .predictors.registry import PREDICTOR_NAMES, PredictorContext
from .search import run_nas
from .space import Architecture
from .store import BenchmarkStore, EvaluationService, build

SCHEMA_VERSION = 1


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_sidecar(path: Path, command: str, seed, cfg: dict) -> None:
    meta = {
        "tool": "predbench",
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": seed,
        "config_hash": config_hash(cfg),
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def _resolve_seed(args, required: bool = True):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PREDBENCH_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError("PREDBENCH_SEED must be an integer") from exc
    if required:
        raise ConfigError("a seed is required: pass --seed or set PREDBENCH_SEED")
    return 0


def _load_store(args) -> BenchmarkStore:
    if not args.store:
        raise ConfigError("this subcommand needs --store")
    return BenchmarkStore.load(args.store)


def _predictor_names(args, cfg) -> list[str]:
    names = args.predictors.split(",") if args.predictors else cfg["predictors"]
    for name in names:
        if name not in PREDICTOR_NAMES:
            raise ConfigError(
                f"unknown predictor {name!r}; valid names: {', '.join(PREDICTOR_NAMES)}")
    return names


def cmd_build(args, cfg) -> int:
    seed = _resolve_seed(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store = build(space_from(cfg), cfg["build"]["n_archs"], train_from(cfg),
                  dataset_from(cfg), seed=seed, cost_model=cost_from(cfg),
                  workers=args.workers)
    path = out / "benchmark.nbstore"
    store.save(path)
    _write_sidecar(path, "build", seed, cfg)
    print(f"wrote {path} ({len(store)} records)")
    return 0


def cmd_score(args, cfg) -> int:
    seed = _resolve_seed(args)
    store = _load_store(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = _predictor_names(args, cfg)
    sc = cfg["score"]
    if sc["archs"]:
        archs = [Architecture.from_key(k) for k in sc["archs"]]
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(80,)))
        archs = store.sample_archs(rng, min(sc["count"], len(store)))
    query_budget = sc["query_budget"]
    if query_budget is None:
        query_budget = float(store.epochs)
    init_budget = sc["init_budget_trainings"] * store.epochs * store.cost_model.epoch_cost

    ctx = PredictorContext(store, hpo=hpo_from(cfg))
    rows = []
    exclude = {a.key() for a in archs}
    for name in names:
        predictor = ctx.factory(name)(seed)
        ledger = BudgetLedger(init_budget, query_budget)
        init_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(81,)))
        predictor.initialize(StoreView(store, exclude=exclude), ledger, init_rng)
        for arch in archs:
            pred = predictor.query(arch, ledger)
            rows.append((arch.key(), name, pred.score, pred.cost_charged))
    path = out / "predictions.csv"
    _write_csv(path, ["arch", "predictor", "score", "cost"], rows)
    _write_sidecar(path, "score", seed, cfg)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_grid(args, cfg) -> int:
    seed = _resolve_seed(args)
    store = _load_store(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = _predictor_names(args, cfg)
    grid = grid_from(cfg, store.epochs)
    ctx = PredictorContext(store, hpo=hpo_from(cfg))
    result = run_grid(ctx.factories(names), store, grid,
                      test_size=cfg["grid"]["test_size"],
                      trials=cfg["grid"]["trials"], seed=seed,
                      protocol=cfg["grid"]["protocol"],
                      mutation_max_attrs=cfg["grid"]["mutation_max_attrs"])
    grid_path = out / "grid.csv"
    _write_csv(grid_path,
               ["predictor", "init_budget", "query_budget", "metric", "mean", "std", "trials"],
               result.to_rows())
    _write_sidecar(grid_path, "grid", seed, cfg)

    pareto_rows = []
    for metric in result.metrics:
        winners, _ = pareto_best(result, metric)
        for (i, q), name in sorted(winners.items()):
            pareto_rows.append((metric, result.grid.init_levels[i],
                                result.grid.query_levels[q], name or ""))
    pareto_path = out / "pareto.csv"
    _write_csv(pareto_path, ["metric", "init_budget", "query_budget", "winner"], pareto_rows)
    _write_sidecar(pareto_path, "grid", seed, cfg)
    print(f"wrote {grid_path} and {pareto_path}")
    return 0


def cmd_nas(args, cfg) -> int:
    seed = _resolve_seed(args)
    store = _load_store(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    nas_cfg = nas_from(cfg)
    ctx = PredictorContext(store, hpo=hpo_from(cfg))
    service = EvaluationService(store)
    pred_name = cfg["nas"]["predictor"]
    if pred_name not in PREDICTOR_NAMES:
        raise ConfigError(
            f"unknown predictor {pred_name!r}; valid names: {', '.join(PREDICTOR_NAMES)}")
    factory = ctx.factory(pred_name, query_budget=nas_cfg.query_budget)
    rows = []
    for run in range(cfg["nas"]["runs"]):
        run_seed = seed + run
        trace = run_nas(store, nas_cfg, seed=run_seed,
                        predictor_factory=factory,
                        model_kind=cfg["nas"]["model_kind"],
                        hpo=hpo_from(cfg), service=service)
        for step, (cost, err) in enumerate(trace.steps):
            rows.append((run_seed, step, cost, err))
    path = out / "nas.csv"
    _write_csv(path, ["seed", "step", "cost", "best_val_error"], rows)
    _write_sidecar(path, "nas", seed, cfg)
    print(f"wrote {path} ({cfg['nas']['runs']} runs)")
    return 0


def cmd_report(args, cfg) -> int:
    seed = _resolve_seed(args, required=False)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"schema_version": SCHEMA_VERSION, "inputs": [str(p) for p in args.inputs]}
    for path in args.inputs:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        if header[:4] == ["predictor", "init_budget", "query_budget", "metric"]:
            typed = [(r[0], float(r[1]), float(r[2]), r[3], float(r[4]), float(r[5]), int(r[6]))
                     for r in rows]
            result = ResultGrid.from_rows(typed)
            winners_out, pareto_out = {}, {}
            for metric in METRIC_NAMES:
                if metric not in result.metrics:
                    continue
                winners, pareto = pareto_best(result, metric)
                winners_out[metric] = [
                    {"init_budget": result.grid.init_levels[i],
                     "query_budget": result.grid.query_levels[q],
                     "winner": name}
                    for (i, q), name in sorted(winners.items())
                ]
                pareto_out[metric] = pareto
            report["per_cell_winners"] = winners_out
            report["pareto_sets"] = pareto_out
        elif header[:2] == ["predictor", "overall_std"]:
            report["seed_variance"] = [
                {"predictor": r[0], "overall_std": float(r[1]), "fixed_dataset_std": float(r[2])}
                for r in rows
            ]
        else:
            raise ConfigError(f"unrecognized input schema in {path}")
    path = out / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_sidecar(path, "report", seed, cfg)
    print(f"wrote {path}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predbench",
        description="benchmark suite for architecture performance predictors")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, store=False):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (falls back to PREDBENCH_SEED)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config value")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        if store:
            p.add_argument("--store", required=True, help="benchmark .nbstore file")

    common(sub.add_parser("build", help="train the tabular benchmark"))
    p_score = sub.add_parser("score", help="score architectures with predictors")
    common(p_score, store=True)
    p_score.add_argument("--predictors", help="comma-separated predictor names")
    p_grid = sub.add_parser("grid", help="run the budget-grid evaluation")
    common(p_grid, store=True)
    p_grid.add_argument("--predictors", help="comma-separated predictor names")
    common(sub.add_parser("nas", help="run predictor-guided search"), store=True)
    p_rep = sub.add_parser("report", help="summarize result CSVs into JSON")
    common(p_rep)
    p_rep.add_argument("inputs", nargs="+", help="result CSV files")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args.overrides)
        handler = {
            "build": cmd_build,
            "score": cmd_score,
            "grid": cmd_grid,
            "nas": cmd_nas,
            "report": cmd_report,
        }[args.command]
        return handler(args, cfg)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    except (PredbenchError, OSError) as exc:
        print(json.dumps({"error": "runtime", "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
