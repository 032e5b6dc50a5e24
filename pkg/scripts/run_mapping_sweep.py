#!/usr/bin/env python3
"""Energy per MAC of bias and differential mappings across weight spreads.

Writes results/mapping-sweep-<model>.csv and prints, per cell resolution, the
bias minus differential gap at each sigma.
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

from xbar_energy.cli import main as cli

OUT = Path(__file__).resolve().parents[1] / "results"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cell-model", default="C")
    ap.add_argument("--sigma", default=",".join(str(2.0**-k) for k in range(6, -1, -1)))
    ap.add_argument("--cell-bits", default="1,2,4,8")
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    OUT.mkdir(exist_ok=True)
    path = OUT / f"mapping-sweep-{args.cell_model}.csv"
    rc = cli(["sweep-mappings", "--cell-model", args.cell_model, "--sigma", args.sigma,
              "--cell-bits", args.cell_bits, "--n", str(args.n), "--threads", str(args.threads),
              "--out", str(path)])
    if rc != 0:
        raise SystemExit(rc)
    e = defaultdict(dict)
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            e[int(r["cell_bits"]), float(r["sigma"])][r["scheme"]] = float(r["e_per_mac_fj"])
    print(f"{'c':>2} {'sigma':>9} {'bias fJ':>10} {'diff fJ':>10} {'gap fJ':>10}")
    for (c, s), v in sorted(e.items()):
        print(f"{c:>2} {s:>9.5f} {v['bias']:>10.2f} {v['diff']:>10.2f} "
              f"{v['bias'] - v['diff']:>10.2f}")


if __name__ == "__main__":
    main()
