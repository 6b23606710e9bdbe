#!/usr/bin/env python3
"""Seed-variance decomposition for a representative predictor set.

For each predictor: overall Kendall-tau std across trials, and the std with
train/test sets held fixed (predictor stochasticity alone). Writes
out/seed_variance/seed_variance.csv, which `predbench report` can ingest.
"""

import csv
import sys
from pathlib import Path

from predbench.harness import seed_variance
from predbench.predictors.registry import PredictorContext
from predbench.store import BenchmarkStore

PREDICTORS = ["bananas", "bayes_linear", "jacob_cov", "gradient_boosted_trees",
              "sotl_e", "synflow", "random"]


def main(store_path="out/benchmark/benchmark.nbstore", redraws=50, fixed_trials=10):
    store = BenchmarkStore.load(store_path)
    ctx = PredictorContext(store)
    out = Path("out/seed_variance")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name in PREDICTORS:
        overall, fixed = seed_variance(ctx.factory(name), store,
                                       query_budget=10.05,
                                       redraws=int(redraws),
                                       fixed_trials=int(fixed_trials))
        print(f"{name:24s} overall std {overall:.4f}  fixed-dataset std {fixed:.4f}")
        rows.append((name, repr(overall), repr(fixed)))
    with open(out / "seed_variance.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["predictor", "overall_std", "fixed_dataset_std"])
        writer.writerows(rows)
    print(f"wrote {out / 'seed_variance.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
