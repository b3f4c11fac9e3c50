"""Local polynomial design algebra.

All fits are solved in scaled coordinates u_i = (x_i - point) / h through a
QR factorisation of the kernel-weighted design; observations with zero kernel
weight are dropped before factorising. Weights follow the convention

    ghat(point) = (nh)^{-1} * sum_i w_i(point) * y_i.

Side filters (used for regression discontinuity) keep observations with
x_i >= point (``right_of_cutoff``) or x_i < point (``left_of_cutoff``). The
filter is anchored at ``config.point`` and is carried into every inner fit of
the double-smoothing step, so n in the (nh)^{-1} scaling is always the full
sample size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import NamedTuple

import numpy as np

from .errors import DegenerateScaling, InsufficientLocalData
from .kernels import KernelSpec, eval_kernel, get_kernel

SIDES = ("both", "right_of_cutoff", "left_of_cutoff")
RANK_TOL = 1e-10


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ValueError(f"x has {x.size} entries but y has {y.size}")
        if x.size < 1:
            raise ValueError("sample is empty")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("sample contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class FitConfig:
    point: float
    bandwidth: float
    order: int = 1
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec("epanechnikov"))
    side: str = "both"

    def __post_init__(self):
        object.__setattr__(self, "kernel", get_kernel(self.kernel))
        object.__setattr__(self, "point", float(self.point))
        object.__setattr__(self, "bandwidth", float(self.bandwidth))
        if not (np.isfinite(self.point) and np.isfinite(self.bandwidth)):
            raise ValueError("point and bandwidth must be finite")
        if self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if int(self.order) != self.order or self.order < 1 or self.order % 2 == 0:
            raise ValueError(f"order must be an odd integer >= 1, got {self.order}")
        object.__setattr__(self, "order", int(self.order))
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")


@dataclass(frozen=True)
class WeightVector:
    values: np.ndarray
    effective_n: int


@dataclass(frozen=True)
class LocalFit:
    beta: np.ndarray          # coefficients on (x - point)**j, unscaled
    ghat: float
    weights: WeightVector
    curvature: float


@dataclass(frozen=True)
class DoubleSmooth:
    """Outer weights w_i(point), LP bias-correction weights and the two curvature constants."""

    weights: np.ndarray
    lp_bc: np.ndarray
    curvature: float          # C_n
    curvature_lp: float       # C_LP,n
    window: np.ndarray        # indices j with nonzero kernel weight at point
    inner_curvature: np.ndarray  # C_n(x_j) for j in window

    @property
    def q(self) -> float:
        return q_from_curvatures(self.curvature, self.curvature_lp)


def side_mask(x: np.ndarray, cutoff: float, side: str) -> np.ndarray:
    if side == "both":
        return np.ones(x.shape, dtype=bool)
    if side == "right_of_cutoff":
        return x >= cutoff
    if side == "left_of_cutoff":
        return x < cutoff
    raise ValueError(f"unknown side {side!r}")


def _side_label(config: FitConfig) -> str | None:
    return None if config.side == "both" else config.side


def _window(sample: Sample, config: FitConfig):
    u = (sample.x - config.point) / config.bandwidth
    inside = (np.abs(u) < 1.0) & side_mask(sample.x, config.point, config.side)
    idx = np.flatnonzero(inside)
    return idx, u[idx]


def _factor(u: np.ndarray, order: int, kernel: KernelSpec, config: FitConfig):
    """QR of sqrt(K) * [1, u, ..., u**order]; rank-checked."""
    if u.size < order + 1:
        raise InsufficientLocalData(
            f"{u.size} observations in the window at {config.point:g} with h={config.bandwidth:g}; "
            f"need at least {order + 1}",
            side=_side_label(config), point=config.point)
    sk = np.sqrt(eval_kernel(kernel, u))
    A = sk[:, None] * np.vander(u, order + 1, increasing=True)
    Q, R = np.linalg.qr(A)
    s = np.linalg.svd(R, compute_uv=False)
    if not s[-1] > RANK_TOL * s[0]:
        raise InsufficientLocalData(
            f"rank-deficient local design at {config.point:g} (h={config.bandwidth:g})",
            side=_side_label(config), point=config.point)
    return Q, R, sk


def _unit(order: int, j: int) -> np.ndarray:
    e = np.zeros(order + 1)
    e[j] = 1.0
    return e


def local_weights(sample: Sample, config: FitConfig, order: int | None = None) -> WeightVector:
    """w_i(point) for the order-p fit, aligned with the sample (zeros off-window)."""
    order = config.order if order is None else order
    idx, u = _window(sample, config)
    Q, R, sk = _factor(u, order, config.kernel, config)
    a = np.linalg.solve(R.T, _unit(order, 0))
    nh = sample.n * config.bandwidth
    values = np.zeros(sample.n)
    values[idx] = nh * (Q @ a) * sk
    return WeightVector(values=values, effective_n=int(idx.size))


def local_fit(sample: Sample, config: FitConfig, order: int | None = None) -> LocalFit:
    """Kernel-weighted least squares of the given order (default config.order) at config.point."""
    order = config.order if order is None else order
    idx, u = _window(sample, config)
    Q, R, sk = _factor(u, order, config.kernel, config)
    h = config.bandwidth
    nh = sample.n * h
    scaled = np.linalg.solve(R, Q.T @ (sk * sample.y[idx]))
    beta = scaled / h ** np.arange(order + 1)
    a = np.linalg.solve(R.T, _unit(order, 0))
    values = np.zeros(sample.n)
    w = nh * (Q @ a) * sk
    values[idx] = w
    curvature = float(np.sum(w * u ** (order + 1)) / nh)
    return LocalFit(beta=beta, ghat=float(beta[0]),
                    weights=WeightVector(values, int(idx.size)), curvature=curvature)


def curvature_constant(sample: Sample, config: FitConfig) -> float:
    """C_n(point) = (nh)^{-1} sum_i w_i(point) ((x_i - point)/h)**(p+1)."""
    p = config.order
    w = local_weights(sample, config)
    u = (sample.x - config.point) / config.bandwidth
    return float(np.sum(w.values * u ** (p + 1)) / (sample.n * config.bandwidth))


def _batched_qr(sk: np.ndarray, U: np.ndarray, order: int):
    """Thin QR of the stacked designs sqrt(K) * [1, U, ..., U**order], one per row of U.

    Classical Gram-Schmidt with one full reorthogonalisation pass (CGS2), vectorised
    over the batch. Returns the list of Q columns (each shaped like U) and R.
    """
    J = U.shape[0]
    R = np.zeros((J, order + 1, order + 1))
    Q = []
    col = sk
    for k in range(order + 1):
        v = col.copy()
        for _ in range(2):
            for l in range(k):
                r = np.einsum("ji,ji->j", Q[l], v)
                R[:, l, k] += r
                v -= r[:, None] * Q[l]
        nrm = np.sqrt(np.einsum("ji,ji->j", v, v))
        R[:, k, k] = nrm
        Q.append(v / np.where(nrm > 0, nrm, 1.0)[:, None])
        col = col * U
    return Q, R


def inner_weight_matrix(sample: Sample, config: FitConfig, centers: np.ndarray,
                        columns: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Matrix W[j, i] = w_{columns[i]}(x_{centers[j]}), the order-p weights of fits re-centred at
    each x_j, plus the matching scaled offsets U[j, i] = (x_i - x_j)/h.

    Columns must contain every observation within h of every centre (on the active side).
    """
    p = config.order
    h = config.bandwidth
    nh = sample.n * h
    xc = sample.x[centers]
    U = (sample.x[columns][None, :] - xc[:, None]) / h
    Km = eval_kernel(config.kernel, U)
    counts = np.count_nonzero(Km, axis=1)
    if np.any(counts < p + 1):
        bad = float(xc[np.argmin(counts)])
        raise InsufficientLocalData(
            f"inner fit at x={bad:g} has fewer than {p + 1} observations in its window",
            side=_side_label(config), point=bad)
    sk = np.sqrt(Km)
    Q, R = _batched_qr(sk, U, p)
    s = np.linalg.svd(R, compute_uv=False)
    deficient = ~(s[:, -1] > RANK_TOL * s[:, 0])
    if np.any(deficient):
        bad = float(xc[np.argmax(deficient)])
        raise InsufficientLocalData(
            f"rank-deficient inner fit at x={bad:g}", side=_side_label(config), point=bad)
    rhs = np.broadcast_to(_unit(p, 0), (len(centers), p + 1))[..., None]
    a = np.linalg.solve(np.swapaxes(R, 1, 2), rhs)[..., 0]
    W = Q[0] * a[:, :1]
    for k in range(1, p + 1):
        W += Q[k] * a[:, k:k + 1]
    return nh * W * sk, U


def double_smooth(sample: Sample, config: FitConfig) -> DoubleSmooth:
    """Outer weights, LP bias-correction weights, C_n and C_LP,n in one pass.

    Only observations within 2h of the point can receive nonzero LP weight, so the
    inner fits are restricted to that reach; cost is O(n_eff**2).
    """
    p = config.order
    h = config.bandwidth
    nh = sample.n * h
    outer = local_weights(sample, config)
    w = outer.values
    u = (sample.x - config.point) / h
    active = side_mask(sample.x, config.point, config.side)
    window = np.flatnonzero((np.abs(u) < 1.0) & active)
    reach = np.flatnonzero((np.abs(u) < 2.0) & active)
    W, U = inner_weight_matrix(sample, config, window, reach)
    inner_c = np.einsum("ji,ji->j", W, U ** (p + 1)) / nh
    lp_bc = np.zeros(sample.n)
    lp_bc[reach] = (w[window] @ W) / nh
    lp_bc -= w
    c_n = float(np.sum(w * u ** (p + 1)) / nh)
    c_lp = float(np.dot(w[window], inner_c) / nh)
    return DoubleSmooth(weights=w, lp_bc=lp_bc, curvature=c_n, curvature_lp=c_lp,
                        window=window, inner_curvature=inner_c)


def lp_bc_weights(sample: Sample, config: FitConfig) -> np.ndarray:
    """w_LP-bc,i(point) = (nh)^{-1} sum_j w_j(point) w_i(x_j) - w_i(point)."""
    return double_smooth(sample, config).lp_bc


def q_from_curvatures(c_n: float, c_lp: float) -> float:
    if not abs(c_lp) >= 1e-12 * abs(c_n) or c_lp == 0.0:
        raise DegenerateScaling(f"C_LP,n={c_lp:g} is negligible relative to C_n={c_n:g}")
    return c_n / c_lp


class QFactor(NamedTuple):
    q: float
    c_n: float
    c_lp: float


def q_factor(sample: Sample, config: FitConfig) -> QFactor:
    """Boundary scaling Q_n = C_n / C_LP,n."""
    ds = double_smooth(sample, config)
    return QFactor(q=ds.q, c_n=ds.curvature, c_lp=ds.curvature_lp)


def derivative_estimate(fit: LocalFit, j: int) -> float:
    """j-th derivative estimate j! * beta_j from a local fit of order >= j."""
    return factorial(j) * float(fit.beta[j])
