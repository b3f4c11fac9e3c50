"""Equivalent kernels and the asymptotic constants of the interval lengths.

Interior points use the region (-1, 1); boundary points use [0, 1] (a left
boundary at the evaluation point, as for the treated side of a discontinuity).
Near the boundary the inner local fits of the double-smoothing step see a
truncated window [-s, 1], which is what ``boundary_equivalent_kernel`` encodes.

Squared integrals of the bias-corrected equivalent kernels are the asymptotic
variances of the studentised statistics (up to sigma^2 / f), so their square
root ratios are the asymptotic interval length ratios.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import quad

from .errors import QuadratureNonconvergence, SingularMomentMatrix
from .kernels import _PIECES, KERNEL_NAMES, eval_kernel, get_kernel

REGIONS = ("interior", "boundary")
FAMILIES = ("w", "w_gp_bc", "w_conv", "w_conv_bnd", "w_plp", "w_mplp", "w_rbc")
EPSABS = 1e-10
EPSREL = 1e-10
LIMIT = 200
COND_LIMIT = 1e12


def _quad(f, a: float, b: float, points=()) -> float:
    pts = sorted({float(t) for t in points if a < t < b})
    val, err, info, *msg = quad(f, a, b, points=pts or None, epsabs=EPSABS, epsrel=EPSREL,
                                limit=LIMIT, full_output=1)
    if msg and err > 1e-7:
        raise QuadratureNonconvergence(f"quad on [{a:g}, {b:g}]: {msg[0]} (error estimate {err:.2g})")
    return float(val)


def _check_p(p: int) -> int:
    if int(p) != p or p < 1 or p % 2 == 0:
        raise ValueError(f"order must be an odd integer >= 1, got {p}")
    return int(p)


def _region_lower(region: str) -> float:
    if region not in REGIONS:
        raise ValueError(f"region must be one of {REGIONS}, got {region!r}")
    return -1.0 if region == "interior" else 0.0


@lru_cache(maxsize=None)
def _antiderivatives(name: str, top: int):
    """Per piece: (lo, hi, [antiderivative of u^j K(u) for j = 0..top])."""
    out = []
    for lo, hi, coef in _PIECES[name]:
        c = np.asarray(coef)
        out.append((lo, hi, [P.polyint(P.polymul(c, np.r_[np.zeros(j), 1.0])) for j in range(top + 1)]))
    return tuple(out)


def _moments(name: str, top: int, lower: float, upper: float = 1.0) -> np.ndarray:
    m = np.zeros(top + 1)
    for lo, hi, anti in _antiderivatives(name, top):
        a, b = max(lo, lower), min(hi, upper)
        if b <= a:
            continue
        m += [P.polyval(b, A) - P.polyval(a, A) for A in anti]
    return m


def _gamma_inverse_row(name: str, order: int, lower: float, row: int) -> np.ndarray:
    m = _moments(name, 2 * order, lower)
    idx = np.add.outer(np.arange(order + 1), np.arange(order + 1))
    G = m[idx]
    if not np.isfinite(np.linalg.cond(G)) or np.linalg.cond(G) > COND_LIMIT:
        raise SingularMomentMatrix(
            f"moment matrix of order {order} over [{lower:g}, 1] is singular for {name}")
    e = np.zeros(order + 1)
    e[row] = 1.0
    return np.linalg.solve(G, e)


@lru_cache(maxsize=4096)
def _bnd_row(name: str, p: int, s: float) -> np.ndarray:
    return _gamma_inverse_row(name, p, -min(s, 1.0), 0)


class EquivalentKernels:
    """Closures for one (kernel, p, region)."""

    def __init__(self, kernel, p: int = 1, region: str = "interior"):
        self.kernel = get_kernel(kernel)
        self.p = _check_p(p)
        self.region = region
        self.lower = _region_lower(region)
        name = self.kernel.name
        self._row = _gamma_inverse_row(name, self.p, self.lower, 0)
        self._row_gp = _gamma_inverse_row(name, self.p + 1, self.lower, self.p + 1)
        self.C = _quad(lambda u: self.w(u) * u ** (self.p + 1), self.lower, 1.0, self.kinks)

    @property
    def kinks(self):
        return self.kernel.kinks

    def K(self, u):
        return eval_kernel(self.kernel, u)

    def w(self, u: float) -> float:
        if not self.lower <= u < 1.0:
            return 0.0
        return float(np.polynomial.polynomial.polyval(u, self._row)) * self.K(u)

    def w_gp_bc(self, u: float) -> float:
        if not self.lower <= u < 1.0:
            return 0.0
        return self.C * float(np.polynomial.polynomial.polyval(u, self._row_gp)) * self.K(u)

    def w_rbc(self, u: float) -> float:
        return self.w(u) - self.w_gp_bc(u)

    def w_bnd(self, u: float, s: float) -> float:
        """Order-p equivalent kernel of a fit whose window is truncated to [-s, 1]."""
        if not (-s < u < 1.0 and u > -1.0):
            return 0.0
        return float(np.polynomial.polynomial.polyval(u, _bnd_row(self.kernel.name, self.p, float(s)))) * self.K(u)

    def w_conv(self, u: float) -> float:
        """Interior self-convolution int w(r) w(u - r) dr."""
        lo, hi = max(-1.0, u - 1.0), min(1.0, u + 1.0)
        if hi <= lo:
            return 0.0
        return _quad(lambda r: self.w(r) * self.w(u - r), lo, hi, (0.0, u, u - 1.0, u + 1.0))

    def w_conv_bnd(self, u: float) -> float:
        """Boundary convolution int_0^1 w(r) w_bnd(u - r, r) dr."""
        lo, hi = max(0.0, u - 1.0), min(1.0, u + 1.0)
        if hi <= lo:
            return 0.0
        return _quad(lambda r: self.w(r) * self.w_bnd(u - r, r), lo, hi, (u,))

    def conv(self, u: float) -> float:
        return self.w_conv(u) if self.region == "interior" else self.w_conv_bnd(u)

    @property
    def C_LP(self) -> float:
        if self.region == "interior":
            return self.C
        p = self.p

        def inner(s):
            return _quad(lambda u: self.w_bnd(u, s) * u ** (p + 1), -s, 1.0, (0.0,))

        return _quad(lambda s: self.w(s) * inner(s), 0.0, 1.0, self.kinks)

    def w_plp(self, u: float) -> float:
        return 2.0 * self.w(u) - self.conv(u)

    def w_mplp(self, u: float, q: float | None = None) -> float:
        q = self.C / self.C_LP if q is None else q
        return (1.0 + q) * self.w(u) - q * self.conv(u)

    def family(self, name: str):
        if name not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {name!r}")
        if name == "w_mplp":
            q = self.C / self.C_LP
            return lambda u: self.w_mplp(u, q)
        return getattr(self, name)

    @property
    def conv_range(self) -> tuple[float, float]:
        return (-2.0, 2.0) if self.region == "interior" else (0.0, 2.0)

    @property
    def conv_points(self) -> tuple[float, ...]:
        return (-1.0, 0.0, 1.0) + tuple(t - 1.0 for t in self.kinks) + tuple(t + 1.0 for t in self.kinks)


def equivalent_kernel(kernel, p: int, region: str, u: float, s: float | None = None) -> float:
    """w(u) on the region, or the truncated-window kernel w_bnd(u, s) when s is given."""
    ek = _cached(get_kernel(kernel).name, _check_p(p), region)
    return ek.w(u) if s is None else ek.w_bnd(u, s)


def boundary_equivalent_kernel(kernel, p: int, u: float, s: float) -> float:
    return equivalent_kernel(kernel, p, "boundary", u, s)


def convolution_kernel(kernel, p: int, region: str, u: float) -> float:
    return _cached(get_kernel(kernel).name, _check_p(p), region).conv(u)


@lru_cache(maxsize=None)
def _cached(name: str, p: int, region: str) -> EquivalentKernels:
    return EquivalentKernels(name, p, region)


@dataclass(frozen=True)
class ConstantsReport:
    kernel: str
    p: int
    region: str
    C: float
    C_LP: float
    Q: float
    k_w: float     # int w^2, the conventional variance constant
    k_plp: float
    k_mplp: float
    k_rbc: float
    length_ratio: float

    def rounded(self, digits: int = 2) -> dict:
        out = asdict(self)
        for key, val in out.items():
            if isinstance(val, float):
                out[key] = round_half_away(val, digits)
        return out

    def to_dict(self) -> dict:
        return asdict(self)


SNAP_DIGITS = 10  # quadrature accuracy; exact ties such as 9/8 must not round down


def round_half_away(x: float, digits: int = 2) -> float:
    """Round half away from zero after snapping to the quadrature precision."""
    snapped = Decimal(repr(float(x))).quantize(Decimal(1).scaleb(-SNAP_DIGITS), rounding=ROUND_HALF_UP)
    return float(snapped.quantize(Decimal(1).scaleb(-digits), rounding=ROUND_HALF_UP))


def _sq_integral(f, a, b, points) -> float:
    return _quad(lambda u: f(u) ** 2, a, b, points)


@lru_cache(maxsize=None)
def _constants(name: str, p: int, region: str) -> ConstantsReport:
    ek = _cached(name, p, region)
    lo = ek.lower
    pts = (0.0,) + ek.kinks
    k_w = _sq_integral(ek.w, lo, 1.0, pts)
    k_rbc = _sq_integral(ek.w_rbc, lo, 1.0, pts)
    c_lp = ek.C_LP
    q = ek.C / c_lp
    a, b = ek.conv_range
    k_plp = _sq_integral(ek.w_plp, a, b, ek.conv_points)
    if region == "interior":
        k_mplp = k_plp
    else:
        k_mplp = _sq_integral(lambda u: ek.w_mplp(u, q), a, b, ek.conv_points)
    return ConstantsReport(kernel=name, p=p, region=region, C=ek.C, C_LP=c_lp, Q=q, k_w=k_w,
                           k_plp=k_plp, k_mplp=k_mplp, k_rbc=k_rbc,
                           length_ratio=float(np.sqrt(k_mplp / k_rbc)))


def kernel_constants(kernel, p: int = 1, region: str = "interior") -> ConstantsReport:
    """C, C_LP, Q, the three variance constants and the mPLP/RBC length ratio."""
    _region_lower(region)
    return _constants(get_kernel(kernel).name, _check_p(p), region)


def all_constants(p: int = 1, regions=REGIONS, kernels=KERNEL_NAMES) -> list[ConstantsReport]:
    return [kernel_constants(k, p, r) for r in regions for k in kernels]


@dataclass(frozen=True)
class EquivKernelTable:
    grid: np.ndarray
    values: np.ndarray
    family: str
    region: str
    kernel: str
    p: int


def equiv_kernel_table(kernel, p: int, region: str, family: str, grid=None,
                       points: int = 401) -> EquivKernelTable:
    ek = _cached(get_kernel(kernel).name, _check_p(p), region)
    f = ek.family(family)
    if grid is None:
        a, b = ek.conv_range if family in ("w_conv", "w_conv_bnd", "w_plp", "w_mplp") else (ek.lower, 1.0)
        grid = np.linspace(a, b, points)
    grid = np.asarray(grid, dtype=float)
    return EquivKernelTable(grid=grid, values=np.array([f(u) for u in grid]), family=family,
                            region=region, kernel=ek.kernel.name, p=ek.p)


def emit_grid(kernel, p: int, region: str, path, points: int = 401) -> int:
    """Write u, w_plp, w_mplp, w_rbc on the convolution range to CSV; returns rows written."""
    ek = _cached(get_kernel(kernel).name, _check_p(p), region)
    q = ek.C / ek.C_LP
    a, b = ek.conv_range
    grid = np.linspace(a, b, points)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["u", "w_plp", "w_mplp", "w_rbc"])
        for u in grid:
            wr.writerow([repr(float(u)), repr(ek.w_plp(u)), repr(ek.w_mplp(u, q)), repr(ek.w_rbc(u))])
    return len(grid)
