"""Monte Carlo coverage and length study.

Designs:

* ``npreg``: y = g(x) + N(0, 1), x ~ U(-1, 1),
  g(x) = sin(3 pi x / 2) / (1 + 18 x^2 (sign(x) + 1)).
* ``rdd1`` / ``rdd2``: piecewise quintics with a jump at 0 (Ludwig-Miller and
  Lee style designs), x ~ 2 Beta(2, 4) - 1, noise N(0, 0.1295^2).

Every replication draws from its own Philox stream keyed by
(seed, replication index), so results do not depend on the number of workers
or the order in which replications run.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np
import sympy as sp

from .asymconst import kernel_constants
from .errors import PrepivotError, RngFailure, ZeroCurvature
from .intervals import local_intervals
from .kernels import get_kernel
from .locpoly import FitConfig, Sample
from .rdd import RddSample, rdd_intervals

DGP_KINDS = ("npreg", "rdd1", "rdd2")
TABLE_METHODS = ("naive_gp", "naive_lp", "rbc_pgp", "mplp")
CURVATURE_TOL = 1e-10  # |bias constant| below this counts as zero (roundoff at inflection points)

_RDD_COEF = {
    "rdd1": ((3.71, 2.30, 3.28, 1.45, 0.23, 0.03),
             (0.26, 18.49, -54.81, 74.30, -45.02, 9.83)),
    "rdd2": ((0.48, 1.27, -0.5 * 7.18, 0.7 * 20.21, 1.1 * 21.54, 1.5 * 7.33),
             (0.52, 0.84, -0.1 * 3.00, -0.3 * 7.99, -0.1 * 9.01, 3.56)),
}


@lru_cache(maxsize=None)
def _npreg_derivative(order: int, positive: bool):
    t = sp.Symbol("t", real=True)
    g = sp.sin(3 * sp.pi * t / 2) / (1 + 36 * t**2) if positive else sp.sin(3 * sp.pi * t / 2)
    return sp.lambdify(t, sp.diff(g, t, order), "numpy")


@dataclass(frozen=True)
class DgpSpec:
    kind: str = "npreg"

    def __post_init__(self):
        if self.kind not in DGP_KINDS:
            raise ValueError(f"dgp must be one of {DGP_KINDS}, got {self.kind!r}")

    @property
    def is_rdd(self) -> bool:
        return self.kind != "npreg"

    @property
    def sigma(self) -> float:
        return 1.0 if self.kind == "npreg" else 0.1295

    @property
    def cutoff(self) -> float:
        return 0.0

    def g(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "npreg":
            return np.sin(1.5 * np.pi * x) / (1.0 + 18.0 * x**2 * (np.sign(x) + 1.0))
        left, right = _RDD_COEF[self.kind]
        return np.where(x >= 0.0, np.polynomial.polynomial.polyval(x, right),
                        np.polynomial.polynomial.polyval(x, left))

    def derivative(self, x: float, order: int, side: str = "right") -> float:
        """order-th derivative of g at x; ``side`` picks the branch at a kink or jump at 0."""
        right = x > 0 or (x == 0 and side == "right")
        if self.kind == "npreg":
            return float(_npreg_derivative(order, bool(right))(x))
        coef = _RDD_COEF[self.kind][1 if right else 0]
        return float(np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(coef, order)))

    def density(self, x: float) -> float:
        if self.kind == "npreg":
            return 0.5 if -1.0 <= x <= 1.0 else 0.0
        t = (x + 1.0) / 2.0
        return 0.0 if not 0.0 <= t <= 1.0 else 20.0 * t * (1.0 - t) ** 3 / 2.0

    def true_value(self, point: float | None = None) -> float:
        if self.is_rdd:
            left, right = _RDD_COEF[self.kind]
            return right[0] - left[0]
        return float(self.g(point))

    def draw_x(self, gen: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "npreg":
            return gen.uniform(-1.0, 1.0, n)
        return 2.0 * gen.beta(2.0, 4.0, n) - 1.0


def stream(seed: int, index: int) -> np.random.Generator:
    try:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))
    except (ValueError, TypeError, OverflowError) as exc:
        raise RngFailure(f"cannot build stream for seed={seed}, index={index}: {exc}") from exc


def draw_sample(dgp: DgpSpec, n: int, seed: int = 0, index: int = 0) -> Sample | RddSample:
    """Replication ``index`` of the design; bitwise reproducible for a given (seed, index)."""
    gen = stream(seed, index)
    x = dgp.draw_x(gen, n)
    y = dgp.g(x) + dgp.sigma * gen.standard_normal(n)
    if dgp.is_rdd:
        return RddSample(x, y, dgp.cutoff)
    return Sample(x, y)


def amse_coefficients(dgp: DgpSpec, point: float, kernel, p: int, region: str) -> tuple[float, float]:
    """(b, v2) in AMSE(h) = b^2 h^{2(p+1)} + v2 / (n h)."""
    rep = kernel_constants(kernel, p, region)
    q = p + 1
    if dgp.is_rdd:
        jump = dgp.derivative(point, q, "right") - dgp.derivative(point, q, "left")
        b = jump * rep.C / factorial(q)
        f = dgp.density(point)
        v2 = 2.0 * dgp.sigma**2 * rep.k_w / f
    else:
        b = dgp.derivative(point, q) * rep.C / factorial(q)
        v2 = dgp.sigma**2 * rep.k_w / dgp.density(point)
    return float(b), float(v2)


def oracle_bandwidth(dgp: DgpSpec, point: float, n: int, kernel="epanechnikov", p: int = 1,
                     region: str | None = None) -> float:
    """Infeasible AMSE-optimal bandwidth [v2 / (2 (p+1) b^2 n)]^{1/(2p+3)}."""
    region = region or default_region(dgp, point)
    b, v2 = amse_coefficients(dgp, point, kernel, p, region)
    if not (np.isfinite(b) and abs(b) > CURVATURE_TOL):
        raise ZeroCurvature(f"bias constant is zero at {point:g}; the AMSE oracle is undefined")
    return float((v2 / (2.0 * (p + 1) * b * b * n)) ** (1.0 / (2 * p + 3)))


def amse(h, b: float, v2: float, n: int, p: int = 1):
    h = np.asarray(h, dtype=float)
    return b * b * h ** (2 * (p + 1)) + v2 / (n * h)


def default_region(dgp: DgpSpec, point: float) -> str:
    if dgp.is_rdd:
        return "boundary"
    return "boundary" if abs(abs(point) - 1.0) < 1e-12 else "interior"


@dataclass(frozen=True)
class SimConfig:
    dgp: DgpSpec = field(default_factory=DgpSpec)
    n: int = 2000
    replications: int = 5000
    alpha: float = 0.05
    point: float = -1.0 / 3.0
    kernel: str = "epanechnikov"
    p: int = 1
    bandwidth_rule: str | float = "oracle_mse"
    hc: str = "hc3"
    methods: tuple[str, ...] = TABLE_METHODS
    seed: int = 1
    workers: int | None = None
    bandwidths: tuple[float, ...] | None = None  # per-replication replay, cycled if short
    label: str | None = None

    def __post_init__(self):
        if isinstance(self.dgp, str):
            object.__setattr__(self, "dgp", DgpSpec(self.dgp))
        if int(self.replications) != self.replications or self.replications < 1:
            raise ValueError("replications must be an integer >= 1")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        get_kernel(self.kernel)
        if self.dgp.is_rdd and self.point != self.dgp.cutoff:
            object.__setattr__(self, "point", self.dgp.cutoff)
        if self.bandwidths is not None:
            bw = tuple(float(b) for b in self.bandwidths)
            if not bw or any(not b > 0 for b in bw):
                raise ValueError("replayed bandwidths must be positive")
            object.__setattr__(self, "bandwidths", bw)
        elif isinstance(self.bandwidth_rule, str):
            if self.bandwidth_rule not in ("oracle_mse", "oracle"):
                raise ValueError("bandwidth_rule must be 'oracle_mse' or a positive float")
        elif not float(self.bandwidth_rule) > 0:
            raise ValueError("fixed bandwidth must be positive")
        object.__setattr__(self, "methods", tuple(self.methods))

    @property
    def rule(self) -> str:
        if self.bandwidths is not None:
            return "replay"
        return "oracle" if isinstance(self.bandwidth_rule, str) else "fixed"

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.dgp.is_rdd:
            return self.dgp.kind
        return "npreg_bnd" if default_region(self.dgp, self.point) == "boundary" else "npreg_int"

    def bandwidth(self, index: int) -> float:
        if self.bandwidths is not None:
            return self.bandwidths[index % len(self.bandwidths)]
        if isinstance(self.bandwidth_rule, str):
            return oracle_bandwidth(self.dgp, self.point, self.n, self.kernel, self.p)
        return float(self.bandwidth_rule)


@dataclass(frozen=True)
class MethodSummary:
    method: str
    coverage_pct: float
    avg_length: float
    failures: int
    successes: int


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    hbar: float
    summaries: dict[str, MethodSummary]
    covered: dict[str, np.ndarray] = field(repr=False)
    lengths: dict[str, np.ndarray] = field(repr=False)

    def rows(self) -> list[dict]:
        c = self.config
        return [dict(dgp=c.name, n=c.n, rule=c.rule, hbar=self.hbar, method=m,
                     coverage=s.coverage_pct, length=s.avg_length, failures=s.failures)
                for m, s in self.summaries.items()]

    def coverage_se_pct(self, method: str) -> float:
        s = self.summaries[method]
        pi = s.coverage_pct / 100.0
        return 100.0 * float(np.sqrt(max(pi * (1 - pi), 1e-12) / max(s.successes, 1)))


CSV_COLUMNS = ("dgp", "n", "rule", "hbar", "method", "coverage", "length", "failures")


def _one(config: SimConfig, index: int):
    """(h, {method: (covered, length) or None}) for replication ``index``."""
    h = config.bandwidth(index)
    data = draw_sample(config.dgp, config.n, config.seed, index)
    truth = config.dgp.true_value(config.point)
    try:
        if config.dgp.is_rdd:
            cis = rdd_intervals(data, h, config.p, config.kernel, config.hc, config.alpha,
                                methods=config.methods)
        else:
            cfg = FitConfig(config.point, h, config.p, config.kernel)
            cis = local_intervals(data, cfg, config.alpha, config.hc, methods=config.methods)
    except PrepivotError:
        return h, {m: None for m in config.methods}
    return h, {m: (None if ci is None else (ci.contains(truth), ci.length)) for m, ci in cis.items()}


def _batch(args):
    config, start, stop = args
    return [_one(config, i) for i in range(start, stop)]


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("NPREG_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, int(n))


def run_simulation(config: SimConfig, progress=None) -> SimResult:
    """Run all replications and aggregate coverage (in %) and average length per method."""
    reps = config.replications
    workers = min(worker_count(config.workers), reps)
    batch = max(1, min(250, reps // (4 * workers) or 1))
    jobs = [(config, s, min(s + batch, reps)) for s in range(0, reps, batch)]
    if workers == 1:
        results = []
        for j in jobs:
            results.extend(_batch(j))
            if progress is not None:
                progress(len(results), reps)
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = [r for part in ex.map(_batch, jobs) for r in part]  # ordered gather
    hs = np.array([h for h, _ in results])
    covered, lengths, summaries = {}, {}, {}
    for m in config.methods:
        ok = [r[m] for _, r in results if r.get(m) is not None]
        cov = np.array([c for c, _ in ok], dtype=bool)
        ln = np.array([l for _, l in ok], dtype=float)
        covered[m], lengths[m] = cov, ln
        summaries[m] = MethodSummary(
            method=m, coverage_pct=float(100.0 * cov.mean()) if cov.size else float("nan"),
            avg_length=float(ln.mean()) if ln.size else float("nan"),
            failures=reps - cov.size, successes=int(cov.size))
    return SimResult(config=config, hbar=float(hs.mean()), summaries=summaries,
                     covered=covered, lengths=lengths)


def table_configs(table: int, n: int | None = None, replications: int = 5000, seed: int = 1,
                  dgps=None, **overrides) -> list[SimConfig]:
    """Configurations behind the coverage tables: 4 = nonparametric regression, 5 = RDD."""
    if table == 4:
        n = 2000 if n is None else n
        rows = [("npreg", -1.0 / 3.0), ("npreg", -1.0)]
        labels = ["npreg_int", "npreg_bnd"]
        kernel = "epanechnikov"
    elif table == 5:
        n = 4000 if n is None else n
        rows = [("rdd1", 0.0), ("rdd2", 0.0)]
        labels = ["rdd1", "rdd2"]
        kernel = "triangular"
    else:
        raise ValueError("table must be 4 or 5")
    out = []
    for (kind, point), label in zip(rows, labels):
        if dgps and label not in dgps and kind not in dgps:
            continue
        kw = dict(dgp=DgpSpec(kind), n=n, replications=replications, point=point, kernel=kernel,
                  seed=seed, label=label)
        kw.update(overrides)
        out.append(SimConfig(**kw))
    return out


def write_csv(results, path_or_file) -> None:
    rows = [r for res in results for r in res.rows()]
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        wr = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if own:
            fh.close()


def read_bandwidths(path) -> tuple[float, ...]:
    """One bandwidth per line (or a CSV whose last column is h); blank and # lines skipped."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            tok = s.split(",")[-1].strip()
            try:
                out.append(float(tok))
            except ValueError:
                if lineno == 1:
                    continue  # header
                from .errors import ParseError
                raise ParseError(f"bad bandwidth {tok!r}", line=lineno) from None
    if not out:
        raise ValueError(f"no bandwidths in {path}")
    return tuple(out)
