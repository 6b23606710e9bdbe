#!/usr/bin/env python3
"""Build the default desk-scale benchmark store (2000 architectures).

Equivalent to `predbench build` with the stock config; takes a few minutes
on two cores and the result is bit-reproducible from the seed.
"""

import sys

from predbench.cli import main

if __name__ == "__main__":
    argv = ["build", "--seed", "7", "--out", "out/benchmark"] + sys.argv[1:]
    sys.exit(main(argv))
