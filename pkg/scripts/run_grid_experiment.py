#!/usr/bin/env python3
"""Budget-grid evaluation of a representative predictor set over the full
11 x 14 lattice, followed by a Pareto report.

Expects a prebuilt store (see build_benchmark.py). The default trial count
matches the harness default (100) and takes a while; pass extra --set
overrides to shrink it, e.g.:

    python scripts/run_grid_experiment.py --set grid.trials=20
"""

import sys

from predbench.cli import main

PREDICTORS = ",".join([
    "flops", "synflow", "jacob_cov", "snip",
    "early_stop_acc", "sotl", "sotl_e", "lce",
    "bayes_linear", "gaussian_process", "random_forest",
    "gradient_boosted_trees", "feedforward_ensemble", "bananas",
    "omni", "omni_enc_jc",
])

if __name__ == "__main__":
    argv = ["grid", "--store", "out/benchmark/benchmark.nbstore", "--seed", "7",
            "--out", "out/grid", "--predictors", PREDICTORS] + sys.argv[1:]
    code = main(argv)
    if code == 0:
        code = main(["report", "out/grid/grid.csv", "--out", "out/grid"])
    sys.exit(code)
