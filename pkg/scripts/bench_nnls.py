#!/usr/bin/env python3
"""Benchmark PDCA and APDCA (both backtracking) on sparse NNLS over the rho grid.

Usage: python3 scripts/bench_nnls.py [--sizes 1-3] [--seeds 1-30] [--out-dir DIR]
"""
import argparse
import csv
import sys
from pathlib import Path

from sparsedc.cli import main as cli


def parse():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1-3")
    ap.add_argument("--seeds", default="1-30")
    ap.add_argument("--jobs", default="1")
    ap.add_argument("--out-dir", default="results/nnls")
    return ap.parse_args()


def main():
    a = parse()
    code = cli(["bench", "--suite", "nnls", "--sizes", a.sizes, "--seeds", a.seeds,
                "--jobs", a.jobs, "--out-dir", a.out_dir, "--quiet"])
    if code == 2:
        return code
    with open(Path(a.out_dir) / "medians.csv") as fh:
        rows = list(csv.DictReader(fh))
    cols = ["size", "solver", "objective", "cardinality", "time"]
    print("\t".join(cols))
    for r in rows:
        print("\t".join(r.get(c, "") for c in cols))
    return 0


if __name__ == "__main__":
    sys.exit(main())
