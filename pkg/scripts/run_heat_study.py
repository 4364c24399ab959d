#!/usr/bin/env python3
"""Refinement study on the heat boundary-control benchmark.

The desk-scale configuration is m=50; pass --m 500 to reproduce the full
figure-scale run (hours).  Writes one CSV per triplet into the output
directory (default ./results).
"""

import argparse
import pathlib
import time

from peerctrl.catalog import TRIPLET_NAMES, load_triplet
from peerctrl.convergence import records_to_csv, run_study
from peerctrl.problems import make_problem


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=50, help="spatial resolution")
    ap.add_argument("--grids", default="16,32,64,128,256,512")
    ap.add_argument("--mode", choices=("exact", "optimized"), default="optimized")
    ap.add_argument("--triplets", default=",".join(TRIPLET_NAMES))
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    grids = [int(tok) for tok in args.grids.split(",")]
    problem = make_problem("heat", m=args.m)
    for name in args.triplets.split(","):
        start = time.perf_counter()
        records = run_study(problem, load_triplet(name), grids, mode=args.mode)
        wall = time.perf_counter() - start
        path = outdir / f"heat_m{args.m}_{args.mode}_{name}.csv"
        path.write_text(records_to_csv(records))
        last = records[-1]
        print(f"{name}: wrote {path} in {wall:.0f}s "
              f"(finest errU={last.err_u:.3e}, eocU={last.eoc_u:.2f})")


if __name__ == "__main__":
    main()
