"""Print the asymptotic variance constants and mPLP/RBC length ratios for all kernels.

    python scripts/constants_tables.py [--order 1] [--digits 2]
"""

from __future__ import annotations

import argparse
import time

from prepivot.asymconst import all_constants, round_half_away


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--order", type=int, default=1)
    ap.add_argument("--digits", type=int, default=2)
    args = ap.parse_args()

    t0 = time.perf_counter()
    rows = all_constants(args.order)
    r = lambda v: f"{round_half_away(v, args.digits):.{args.digits}f}"  # noqa: E731
    print(f"{'kernel':<14}{'region':<10}{'K_method':>10}{'K_RBC':>10}{'ratio':>8}{'Q':>8}")
    for rep in rows:
        k_method = rep.k_plp if rep.region == "interior" else rep.k_mplp
        print(f"{rep.kernel:<14}{rep.region:<10}{r(k_method):>10}{r(rep.k_rbc):>10}"
              f"{r(rep.length_ratio):>8}{rep.Q:>8.4f}")
    print(f"\n({time.perf_counter() - t0:.1f} s; K_method is K_PLP in the interior, K_mPLP at the boundary)")


if __name__ == "__main__":
    main()
