"""Write PLP, mPLP and RBC equivalent-kernel grids (CSV) for every kernel and region.

    python scripts/equiv_kernel_grids.py --outdir results/grids --points 401
"""

from __future__ import annotations

import argparse
from pathlib import Path

from prepivot.asymconst import REGIONS, emit_grid
from prepivot.kernels import KERNEL_NAMES


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results/grids")
    ap.add_argument("--order", type=int, default=1)
    ap.add_argument("--points", type=int, default=401)
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for region in REGIONS:
        for kernel in KERNEL_NAMES:
            path = out / f"{kernel}_{region}_p{args.order}.csv"
            rows = emit_grid(kernel, args.order, region, path, args.points)
            print(f"{path} ({rows} rows)")


if __name__ == "__main__":
    main()
