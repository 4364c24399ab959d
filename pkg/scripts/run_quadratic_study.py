#!/usr/bin/env python3
"""Refinement study on the scalar quadratic benchmark, all three triplets.

Writes one CSV per triplet into the output directory (default ./results).
"""

import argparse
import pathlib

from peerctrl.catalog import TRIPLET_NAMES, load_triplet
from peerctrl.convergence import records_to_csv, run_study
from peerctrl.problems import make_problem


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", default="5,10,20,40",
                    help="comma-separated step counts (N+1)")
    ap.add_argument("--mode", choices=("exact", "optimized"), default="optimized")
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    grids = [int(tok) for tok in args.grids.split(",")]
    problem = make_problem("quadratic")
    for name in TRIPLET_NAMES:
        records = run_study(problem, load_triplet(name), grids, mode=args.mode)
        path = outdir / f"quadratic_{args.mode}_{name}.csv"
        path.write_text(records_to_csv(records))
        last = records[-1]
        print(f"{name}: wrote {path} (finest errU={last.err_u:.3e}, eocU={last.eoc_u:.2f})")


if __name__ == "__main__":
    main()
