"""Closed-form wild-bootstrap bias and variance for the GP, LP and modified-LP schemes.

On a fixed design with multipliers e*_i (mean 0, variance 1) every bootstrap
statistic here has the form

    T* = bias + sum_i core_i * e*_i,

so its mean and standard deviation are available without resampling. The
``core`` vector is kept on the result so that explicit resampling (with any
multiplier law) can be run against the same quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVariance
from .locpoly import DoubleSmooth, FitConfig, Sample, double_smooth, local_weights
from .residuals import HigherOrderFit, ResidualVector, bc_residuals, higher_order_fit

METHODS = ("gp", "lp", "mlp")
VARIANCE_TOL = 1e-24


@dataclass(frozen=True)
class BootstrapMoments:
    method: str
    bias: float          # E*[T*], T* on the sqrt(nh) scale
    boot_sd: float       # sd*[T*]
    debiased_sd: float   # sd of T_n - bias
    q: float
    nh: float
    core: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def bias_correction(self) -> float:
        return self.bias / np.sqrt(self.nh)

    @property
    def se(self) -> float:
        return self.debiased_sd / np.sqrt(self.nh)

    @property
    def m_hat(self) -> float:
        return self.debiased_sd / self.boot_sd


@dataclass(frozen=True)
class LocalAnalysis:
    """Everything the bootstrap moments need at one evaluation point."""

    sample: Sample
    config: FitConfig
    estimate: float
    weights: np.ndarray
    residuals: ResidualVector
    higher: HigherOrderFit
    smooth: DoubleSmooth | None
    curvature: float

    @property
    def nh(self) -> float:
        return self.sample.n * self.config.bandwidth


def analyze(sample: Sample, config: FitConfig, residuals: ResidualVector | None = None,
            hc: str = "hc3", double: bool = True) -> LocalAnalysis:
    higher = higher_order_fit(sample, config)
    if residuals is None:
        residuals = bc_residuals(sample, config, hc=hc, fit=higher)
    if double:
        smooth = double_smooth(sample, config)
        w = smooth.weights
        c_n = smooth.curvature
    else:
        smooth = None
        w = local_weights(sample, config).values
        u = (sample.x - config.point) / config.bandwidth
        c_n = float(np.sum(w * u ** (config.order + 1)) / (sample.n * config.bandwidth))
    nh = sample.n * config.bandwidth
    return LocalAnalysis(sample=sample, config=config, estimate=float(w @ sample.y / nh),
                         weights=w, residuals=residuals, higher=higher, smooth=smooth,
                         curvature=c_n)


def _scale(sample: Sample, config: FitConfig) -> float:
    u = np.abs(sample.x - config.point) / config.bandwidth
    y = sample.y[u < 2.0]
    return float(np.max(np.abs(y))) if y.size else 0.0


def _guard(var: float, scale: float, what: str) -> float:
    if not var > VARIANCE_TOL * scale * scale:
        raise DegenerateVariance(f"{what} variance {var:g} is numerically zero")
    return float(np.sqrt(var))


def moments_from_analysis(a: LocalAnalysis, method: str) -> BootstrapMoments:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    nh = a.nh
    eps = a.residuals.values
    w = a.weights
    scale = _scale(a.sample, a.config)
    core = w * eps / np.sqrt(nh)
    boot_var = float(core @ core)
    if method == "gp":
        # bias = sqrt(nh) * h^{p+1} * beta_{p+1} * C_n; beta in scaled units absorbs h^{p+1}
        bias = np.sqrt(nh) * a.higher.scaled_beta[-1] * a.curvature
        corrected = w - a.curvature * a.higher.gp_weights
        q = 1.0
    else:
        smooth = a.smooth if a.smooth is not None else double_smooth(a.sample, a.config)
        lp_bias = float(smooth.lp_bc @ a.sample.y) / np.sqrt(nh)
        q = 1.0 if method == "lp" else smooth.q
        bias = q * lp_bias
        corrected = w - q * smooth.lp_bc
        core = q * core
        boot_var *= q * q
    debiased_var = float(np.sum(corrected**2 * eps**2) / nh)
    return BootstrapMoments(
        method=method, bias=float(bias),
        boot_sd=_guard(boot_var, scale, "bootstrap"),
        debiased_sd=_guard(debiased_var, scale, "debiased"),
        q=float(q), nh=float(nh), core=core)


def all_moments(sample: Sample, config: FitConfig, residuals: ResidualVector | None = None,
                hc: str = "hc3", methods=METHODS) -> dict[str, BootstrapMoments]:
    a = analyze(sample, config, residuals, hc, double=any(m != "gp" for m in methods))
    return {m: moments_from_analysis(a, m) for m in methods}


def gp_moments(sample: Sample, config: FitConfig, residuals: ResidualVector | None = None,
               hc: str = "hc3") -> BootstrapMoments:
    """GP bootstrap: data generated from the order-(p+1) fit at the point, evaluated globally."""
    return all_moments(sample, config, residuals, hc, methods=("gp",))["gp"]


def lp_moments(sample: Sample, config: FitConfig, residuals: ResidualVector | None = None,
               hc: str = "hc3") -> BootstrapMoments:
    """LP bootstrap: data generated from the order-p fit re-estimated at every regressor."""
    return all_moments(sample, config, residuals, hc, methods=("lp",))["lp"]


def mlp_moments(sample: Sample, config: FitConfig, residuals: ResidualVector | None = None,
                hc: str = "hc3") -> BootstrapMoments:
    """LP bootstrap statistic rescaled by Q_n = C_n / C_LP,n."""
    return all_moments(sample, config, residuals, hc, methods=("mlp",))["mlp"]


def lp_bias_direct(sample: Sample, config: FitConfig) -> float:
    """B_LP via its smoothing form sqrt(nh) * [(nh)^{-1} sum_i w_i(point) ghat(x_i) - ghat(point)].

    Refits the order-p regression at every in-window x_i, independently of the
    convolution-weight route; used to cross-check it. Fitted values do not depend on
    n, so inner fits run on the active-side subsample.
    """
    from .locpoly import local_fit, side_mask

    nh = sample.n * config.bandwidth
    w = local_weights(sample, config).values
    g0 = float(w @ sample.y / nh)
    keep = side_mask(sample.x, config.point, config.side)
    sub = Sample(sample.x[keep], sample.y[keep])
    idx = np.flatnonzero(w != 0.0)
    ghat = np.array([
        local_fit(sub, FitConfig(sample.x[i], config.bandwidth, config.order, config.kernel)).ghat
        for i in idx])
    return float(np.sqrt(nh) * (w[idx] @ ghat / nh - g0))
