"""Command-line interface: ``prepivot {ci,rdd,constants,simulate}``.

Reports are JSON by default (floats written with shortest round-trip repr so a
re-read report reproduces every number exactly), CSV, or a rounded text table.
Errors are reported as ``{"error": {"code": ..., "message": ...}}`` with a
nonzero exit status.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .errors import ParseError, PrepivotError, SchemaError

SCHEMA_VERSION = "1.0"
EXIT_ERROR = 1
EXIT_USAGE = 2


# ---------------------------------------------------------------- ingestion

def ingest_csv(path, cutoff: float | None = None):
    """Read ``x,y`` or ``x,y,d`` data. Returns an RddSample when a cutoff is given, else a Sample."""
    from .locpoly import Sample
    from .rdd import RddSample

    text = Path(path).read_text() if not hasattr(path, "read") else path.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: expected a header row x,y[,d]", line=1) from None
    cols = [c.strip().lower() for c in header]
    unknown = [c for c in cols if c not in ("x", "y", "d")]
    if unknown:
        raise SchemaError(f"unknown column(s) {unknown}; expected x,y or x,y,d", columns=cols)
    if len(set(cols)) != len(cols) or "x" not in cols or "y" not in cols:
        raise SchemaError(f"header must contain x and y exactly once (and optionally d), got {cols}",
                          columns=cols)
    pos = {c: i for i, c in enumerate(cols)}
    data = {c: [] for c in cols}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(cols):
            raise ParseError(f"expected {len(cols)} fields, got {len(row)}", line=line)
        for c, i in pos.items():
            tok = row[i].strip()
            try:
                val = float(tok)
            except ValueError:
                raise ParseError(f"column {c}: {tok!r} is not a number", line=line) from None
            if not math.isfinite(val):
                raise ParseError(f"column {c}: non-finite value {tok!r}", line=line)
            if c == "d" and val not in (0.0, 1.0):
                raise ParseError(f"column d must be 0 or 1, got {tok!r}", line=line)
            data[c].append(val)
    if not data["x"]:
        raise ParseError("no data rows", line=reader.line_num + 1)
    if cutoff is not None:
        return RddSample(data["x"], data["y"], cutoff, data.get("d"))
    return Sample(data["x"], data["y"])


def read_config(path) -> dict[str, str]:
    """key=value per line; '#' comments and blank lines ignored."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ParseError(f"config line is not key=value: {line!r}", line=lineno)
        k, v = s.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


# ---------------------------------------------------------------- parser

def _positive(s: str) -> float:
    v = float(s)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {s}")
    return v


def _methods(s: str) -> list[str]:
    return [m.strip() for m in s.split(",") if m.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")


def _inference(p: argparse.ArgumentParser) -> None:
    p.add_argument("--order", type=int, default=1, help="odd polynomial order p")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--residuals", choices=("hc0", "hc1", "hc2", "hc3"), default="hc3")
    p.add_argument("--bootstrap", choices=("analytic", "resampled"), default="analytic")
    p.add_argument("--reps", type=int, default=999, help="bootstrap replications (resampled)")
    p.add_argument("--multiplier", choices=("gaussian", "rademacher", "mammen"), default="gaussian")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="prepivot", description="Prepivoted bootstrap intervals "
                                 "for local polynomial regression and sharp RDD.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    ci = sub.add_parser("ci", help="intervals for g(point)")
    ci.add_argument("data", help="CSV with header x,y")
    ci.add_argument("--point", type=float, required=True)
    ci.add_argument("--bandwidth", type=_positive, required=True)
    ci.add_argument("--kernel", default="epanechnikov")
    ci.add_argument("--method", type=_methods, default=None,
                    help="comma list from conventional,naive_gp,naive_lp,rbc_pgp,plp,mplp (default all)")
    _inference(ci)
    _common(ci)

    rd = sub.add_parser("rdd", help="intervals for the jump at a cutoff")
    rd.add_argument("data", help="CSV with header x,y or x,y,d")
    rd.add_argument("--cutoff", type=float, default=0.0)
    rd.add_argument("--bandwidth", type=_positive, default=None)
    rd.add_argument("--bandwidth-left", type=_positive, default=None)
    rd.add_argument("--bandwidth-right", type=_positive, default=None)
    rd.add_argument("--kernel", default="triangular")
    rd.add_argument("--kernel-left", default=None)
    rd.add_argument("--kernel-right", default=None)
    rd.add_argument("--method", type=_methods, default=None,
                    help="comma list from naive_gp,naive_lp,rbc_pgp,plp,mplp (default all)")
    _inference(rd)
    _common(rd)

    co = sub.add_parser("constants", help="equivalent-kernel constants")
    co.add_argument("--kernel", action="append", default=None)
    co.add_argument("--all", action="store_true", help="all five kernels")
    co.add_argument("--order", type=int, default=1)
    co.add_argument("--region", choices=("interior", "boundary", "both"), default="both")
    co.add_argument("--emit-grid", default=None,
                    help="CSV of u,w_plp,w_mplp,w_rbc (one kernel and region only)")
    co.add_argument("--grid-points", type=int, default=401)
    co.add_argument("--digits", type=int, default=None, help="round reported values half away from zero")
    _common(co)

    si = sub.add_parser("simulate", help="Monte Carlo coverage tables")
    si.add_argument("--table", type=int, choices=(4, 5), default=4)
    si.add_argument("--dgp", default=None, help="restrict to npreg_int, npreg_bnd, rdd1 or rdd2")
    si.add_argument("--n", type=int, default=None)
    si.add_argument("--reps", type=int, default=5000)
    si.add_argument("--seed", type=int, default=1)
    si.add_argument("--alpha", type=float, default=0.05)
    si.add_argument("--residuals", choices=("hc0", "hc1", "hc2", "hc3"), default="hc3")
    si.add_argument("--workers", type=int, default=None)
    bw = si.add_mutually_exclusive_group()
    bw.add_argument("--oracle", action="store_true", help="infeasible AMSE-optimal h (default)")
    bw.add_argument("--h", dest="h_file", default=None, help="file of per-replication bandwidths")
    bw.add_argument("--bandwidth", type=_positive, default=None, help="fixed h")
    si.add_argument("--out", default=None, help="also write the results CSV here")
    _common(si)
    return ap


def _config_defaults(sub: argparse.ArgumentParser, cfg: dict[str, str], command: str) -> dict:
    known = {a.dest for a in sub._actions}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise SchemaError(f"unknown config key(s) {unknown} for '{command}'")
    defaults = {}
    for a in sub._actions:
        if a.dest not in cfg:
            continue
        raw = cfg[a.dest]
        if isinstance(a, argparse._StoreTrueAction):
            defaults[a.dest] = raw.lower() in ("1", "true", "yes", "on")
        elif isinstance(a, argparse._AppendAction):
            defaults[a.dest] = [s.strip() for s in raw.split(",")]
        elif a.type is not None:
            try:
                defaults[a.dest] = a.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ParseError(f"config key {a.dest}: {exc}") from None
        else:
            defaults[a.dest] = raw
    return defaults


def parse_args(argv=None) -> argparse.Namespace:
    """Parse flags; a --config file supplies defaults (including required flags) that flags override."""
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    choices = ap._subparsers._group_actions[0].choices
    if known.config and known.command in choices:
        sub = choices[known.command]
        defaults = _config_defaults(sub, read_config(known.config), known.command)
        sub.set_defaults(**defaults)
        for a in sub._actions:
            if a.dest in defaults:
                a.required = False
    return ap.parse_args(argv)


# ---------------------------------------------------------------- commands

def _plan(args):
    from .intervals import ResamplingPlan

    if args.bootstrap != "resampled":
        return None
    return ResamplingPlan(args.reps, args.multiplier, args.seed)


def _request(args) -> dict:
    skip = {"config", "output", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _intervals_dict(cis) -> dict:
    return {m: (None if ci is None else ci.to_dict()) for m, ci in cis.items()}


def cmd_ci(args) -> dict:
    from .intervals import LOCAL_METHODS, local_intervals
    from .locpoly import FitConfig

    sample = ingest_csv(args.data)
    cfg = FitConfig(args.point, args.bandwidth, args.order, args.kernel)
    diag: dict = {}
    cis = local_intervals(sample, cfg, args.alpha, args.residuals, tuple(args.method or LOCAL_METHODS),
                          _plan(args), diag)
    return {"intervals": _intervals_dict(cis), "diagnostics": diag}


def cmd_rdd(args) -> dict:
    from .rdd import RDD_METHODS, RddSpec, rdd_intervals

    h_right = args.bandwidth_right or args.bandwidth
    if h_right is None:
        raise SchemaError("rdd needs --bandwidth or --bandwidth-right")
    spec = RddSpec(bandwidth=h_right, order=args.order, kernel=args.kernel_right or args.kernel,
                   bandwidth_left=args.bandwidth_left or args.bandwidth,
                   kernel_left=args.kernel_left or args.kernel)
    sample = ingest_csv(args.data, cutoff=args.cutoff)
    diag: dict = {}
    cis = rdd_intervals(sample, hc=args.residuals, alpha=args.alpha,
                        methods=tuple(args.method or RDD_METHODS), spec=spec, plan=_plan(args),
                        diagnostics=diag)
    return {"intervals": _intervals_dict(cis), "diagnostics": diag}


def cmd_constants(args) -> dict:
    from .asymconst import emit_grid, kernel_constants
    from .kernels import KERNEL_NAMES

    kernels = list(KERNEL_NAMES) if args.all or not args.kernel else args.kernel
    regions = ("interior", "boundary") if args.region == "both" else (args.region,)
    reports = []
    for r in regions:
        for k in kernels:
            rep = kernel_constants(k, args.order, r)
            reports.append(rep.rounded(args.digits) if args.digits is not None else rep.to_dict())
    out = {"constants": reports}
    if args.emit_grid:
        if len(kernels) != 1 or len(regions) != 1:
            raise SchemaError("--emit-grid needs exactly one --kernel and one --region")
        out["grid"] = {"path": args.emit_grid,
                       "rows": emit_grid(kernels[0], args.order, regions[0], args.emit_grid,
                                         args.grid_points)}
    return out


def cmd_simulate(args, progress=None) -> dict:
    from .simharness import read_bandwidths, run_simulation, table_configs, write_csv

    over = dict(alpha=args.alpha, hc=args.residuals, workers=args.workers)
    if args.h_file:
        over["bandwidths"] = read_bandwidths(args.h_file)
    elif args.bandwidth is not None:
        over["bandwidth_rule"] = args.bandwidth
    dgps = [args.dgp] if args.dgp else None
    configs = table_configs(args.table, args.n, args.reps, args.seed, dgps=dgps, **over)
    if not configs:
        raise SchemaError(f"--dgp {args.dgp!r} is not part of table {args.table}")
    results = [run_simulation(c, progress) for c in configs]
    if args.out:
        write_csv(results, args.out)
    return {"results": [r for res in results for r in res.rows()]}


COMMANDS = {"ci": cmd_ci, "rdd": cmd_rdd, "constants": cmd_constants, "simulate": cmd_simulate}


# ---------------------------------------------------------------- output

def _clean(obj):
    """Non-finite floats become null so the report stays valid JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def _flat_rows(report: dict) -> tuple[list[str], list[dict]]:
    if "results" in report:
        from .simharness import CSV_COLUMNS
        return list(CSV_COLUMNS), report["results"]
    if "constants" in report:
        rows = report["constants"]
        return list(rows[0].keys()) if rows else [], rows
    cols = ["method", "lower", "upper", "estimate", "bias_correction", "se", "alpha", "warnings"]
    rows = []
    for m, ci in report["intervals"].items():
        if ci is None:
            rows.append({"method": m})
        else:
            rows.append({**{k: ci[k] for k in cols if k != "warnings"},
                         "warnings": ";".join(ci["warnings"])})
    return cols, rows


def render(report: dict, fmt: str) -> str:
    report = _clean(report)
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    cols, rows = _flat_rows(report)
    if fmt == "csv":
        buf = io.StringIO()
        wr = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (repr(v) if isinstance(v, float) else ("" if v is None else v))
                         for k, v in r.items()})
        return buf.getvalue()

    def cell(v):
        if isinstance(v, float):
            return f"{v:.4f}"
        return "-" if v is None else str(v)

    table = [cols] + [[cell(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in table]
    return "\n".join(lines) + "\n"


def run_command(args: argparse.Namespace) -> dict:
    body = COMMANDS[args.command](args)
    return {"schema_version": SCHEMA_VERSION, "command": args.command, "request": _request(args), **body}


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except PrepivotError as exc:
        sys.stdout.write(json.dumps({"error": _clean(exc.to_dict())}, indent=2) + "\n")
        return EXIT_USAGE
    try:
        report = run_command(args)
    except PrepivotError as exc:
        _emit(json.dumps({"error": _clean(exc.to_dict())}, indent=2) + "\n", None)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        err = {"code": "invalid_input" if isinstance(exc, ValueError) else "io_error", "message": str(exc)}
        _emit(json.dumps({"error": err}, indent=2) + "\n", None)
        return EXIT_ERROR
    _emit(render(report, args.format), args.output)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
