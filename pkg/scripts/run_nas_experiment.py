#!/usr/bin/env python3
"""Predictor-guided evolution runs for a few predictors, emitting one
NasTrace CSV per predictor under out/nas/<name>/.

Uses the prebuilt benchmark store; mutated architectures outside the table
are trained on demand, so prefer a store that covers its space densely for
large run counts.
"""

import sys

from predbench.cli import main

PREDICTORS = ["gradient_boosted_trees", "omni_enc_jc", "sotl_e", "random"]

if __name__ == "__main__":
    for name in PREDICTORS:
        code = main(["nas", "--store", "out/benchmark/benchmark.nbstore",
                     "--seed", "7", "--out", f"out/nas/{name}",
                     "--set", f"nas.predictor={name}"] + sys.argv[1:])
        if code != 0:
            sys.exit(code)
    sys.exit(0)
