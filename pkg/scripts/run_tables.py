"""Monte Carlo coverage and length tables at the infeasible AMSE-optimal bandwidth.

    python scripts/run_tables.py --table 4 --reps 5000 --out results/table4.csv
    python scripts/run_tables.py --table 5 --dgp rdd1 --reps 500

Workers default to the CPU count, capped by NPREG_THREADS.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from prepivot.simharness import read_bandwidths, run_simulation, table_configs, write_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--table", type=int, choices=(4, 5), default=4)
    ap.add_argument("--dgp", action="append", help="npreg_int, npreg_bnd, rdd1 or rdd2 (repeatable)")
    ap.add_argument("--n", type=int, default=None)
    ap.add_argument("--reps", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--h-file", default=None, help="replay per-replication bandwidths")
    ap.add_argument("--out", default=None, help="CSV path (default: stdout)")
    args = ap.parse_args()

    over = {"workers": args.workers}
    if args.h_file:
        over["bandwidths"] = read_bandwidths(args.h_file)
    configs = table_configs(args.table, args.n, args.reps, args.seed, dgps=args.dgp, **over)
    results = []
    for cfg in configs:
        t0 = time.perf_counter()
        res = run_simulation(cfg)
        results.append(res)
        s = res.summaries
        print(f"{cfg.name:<10} n={cfg.n} hbar={res.hbar:.3f}  "
              + "  ".join(f"{m} {s[m].coverage_pct:.1f}%/{s[m].avg_length:.3f}" for m in cfg.methods)
              + f"  ({time.perf_counter() - t0:.0f} s)", file=sys.stderr)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_csv(results, args.out)
    else:
        write_csv(results, sys.stdout)


if __name__ == "__main__":
    main()
