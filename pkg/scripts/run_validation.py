#!/usr/bin/env python3
"""Fast solver vs direct nodal oracle on the 64x64 validation set.

Writes results/validation-<model>.csv and prints the worst and total error.
"""

import argparse
import csv
import json
from pathlib import Path

from xbar_energy.cli import main as cli

OUT = Path(__file__).resolve().parents[1] / "results"


def run(model, n, seed, tol):
    OUT.mkdir(exist_ok=True)
    path = OUT / f"validation-{model}.csv"
    argv = ["validate", "--cell-model", model, "--n", str(n), "--seed", str(seed),
            "--tol", str(tol), "--out", str(path)]
    if cli(argv) != 0:
        raise SystemExit(f"validate failed for {model}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    summary = json.loads(path.with_name(path.name + ".summary.json").read_text())
    worst = max(float(r["rel_err"]) for r in rows[:-1])
    print(f"{model}: {n} MVMs, worst rel err {worst:.3e}, "
          f"total rel err {summary['fast_vs_oracle_total_rel_err']:.3e}, "
          f"{summary['wall_time_s']:.1f} s")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--models", default="A,C,D")
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol", type=float, default=1e-6)
    args = ap.parse_args()
    for m in args.models.split(","):
        run(m, args.n, args.seed, args.tol)
