"""Sharp regression discontinuity at a cutoff.

Each side is an ordinary boundary problem: the kernel is restricted to
x >= cutoff (treated) or x < cutoff (control) and every weight, residual and
inner fit of the double-smoothing step keeps that restriction. Scaling uses the
full sample size n on both sides; interval endpoints do not depend on that
choice as long as it is applied consistently.

The modified bootstrap statistic is Q+ T+* - Q- T-*, so its bias and variances
combine side by side. When the two sides use different bandwidths the sides
are combined on the estimate scale and reported on the sqrt(n h_ref) scale with
h_ref the treated-side bandwidth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bootmoments import METHODS, BootstrapMoments, analyze, moments_from_analysis
from .errors import DegenerateScaling, DesignMismatch, InsufficientLocalData
from .intervals import (ConfidenceInterval, ResamplingPlan, analytic_prepivot_ci,
                        naive_bootstrap_ci, resampled_prepivot_ci)
from .kernels import KernelSpec, get_kernel
from .locpoly import FitConfig, Sample

RIGHT, LEFT = "right_of_cutoff", "left_of_cutoff"


@dataclass(frozen=True)
class RddSample:
    x: np.ndarray
    y: np.ndarray
    cutoff: float = 0.0
    d: np.ndarray | None = None

    def __post_init__(self):
        base = Sample(self.x, self.y)
        object.__setattr__(self, "x", base.x)
        object.__setattr__(self, "y", base.y)
        object.__setattr__(self, "cutoff", float(self.cutoff))
        if not np.isfinite(self.cutoff):
            raise ValueError("cutoff must be finite")
        treated = (base.x >= self.cutoff).astype(float)
        if self.d is not None:
            d = np.asarray(self.d, dtype=float).ravel()
            if d.shape != base.x.shape:
                raise DesignMismatch(f"d has {d.size} entries but x has {base.x.size}")
            if not np.all((d == 0.0) | (d == 1.0)):
                raise DesignMismatch("d must be 0/1")
            bad = np.flatnonzero(d != treated)
            if bad.size:
                raise DesignMismatch(
                    f"d disagrees with 1{{x >= {self.cutoff:g}}} at {bad.size} rows "
                    f"(first index {int(bad[0])}); only sharp designs are supported",
                    row=int(bad[0]))
        object.__setattr__(self, "d", treated)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def sample(self) -> Sample:
        return Sample(self.x, self.y)


@dataclass(frozen=True)
class RddSpec:
    """Bandwidth, order and kernel for each side (shared unless overridden)."""

    bandwidth: float
    order: int = 1
    kernel: KernelSpec | str = "triangular"
    bandwidth_left: float | None = None
    kernel_left: KernelSpec | str | None = None

    def side_config(self, cutoff: float, side: str) -> FitConfig:
        h, k = self.bandwidth, self.kernel
        if side == LEFT:
            h = self.bandwidth if self.bandwidth_left is None else self.bandwidth_left
            k = self.kernel if self.kernel_left is None else self.kernel_left
        return FitConfig(cutoff, h, self.order, get_kernel(k), side)

    @property
    def reference_bandwidth(self) -> float:
        return float(self.bandwidth)


@dataclass(frozen=True)
class SideResult:
    estimate: float
    moments: dict[str, BootstrapMoments]
    scaling_error: DegenerateScaling | None = None


@dataclass(frozen=True)
class RddMoments:
    estimate: float
    bias_rd: float
    debiased_sd_rd: float
    boot_sd_rd: float
    q_plus: float
    q_minus: float
    plus: BootstrapMoments
    minus: BootstrapMoments
    combined: BootstrapMoments = field(repr=False)


def _spec(h, p, kernel, spec: RddSpec | None) -> RddSpec:
    return spec if spec is not None else RddSpec(bandwidth=h, order=p, kernel=kernel)


def _side(sample: RddSample, config: FitConfig, hc: str, methods) -> SideResult:
    try:
        a = analyze(sample.sample, config, hc=hc, double=any(m != "gp" for m in methods))
    except InsufficientLocalData as exc:
        if exc.side is None:
            exc.side = config.side
            exc.context["side"] = config.side
        raise
    mom, err = {}, None
    for m in methods:
        try:
            mom[m] = moments_from_analysis(a, m)
        except DegenerateScaling as exc:
            err = exc
    return SideResult(estimate=a.estimate, moments=mom, scaling_error=err)


def combine(plus: BootstrapMoments, minus: BootstrapMoments, nh_ref: float) -> BootstrapMoments:
    """Moments of T+* - T-* (each already Q-scaled) on the sqrt(nh_ref) scale."""
    rp = np.sqrt(nh_ref / plus.nh)
    rm = np.sqrt(nh_ref / minus.nh)
    bias = rp * plus.bias - rm * minus.bias
    boot = np.hypot(rp * plus.boot_sd, rm * minus.boot_sd)
    deb = np.hypot(rp * plus.debiased_sd, rm * minus.debiased_sd)
    core = None
    if plus.core is not None and minus.core is not None:
        core = rp * plus.core - rm * minus.core
    return BootstrapMoments(method=plus.method, bias=float(bias), boot_sd=float(boot),
                            debiased_sd=float(deb), q=1.0, nh=float(nh_ref), core=core)


def ate_estimate(sample: RddSample, h: float | None = None, p: int = 1, kernel="triangular",
                 spec: RddSpec | None = None) -> float:
    """tau_hat = g+(cutoff) - g-(cutoff) from one-sided local polynomial fits."""
    from .locpoly import local_fit

    spec = _spec(h, p, kernel, spec)
    base = sample.sample
    out = []
    for side in (RIGHT, LEFT):
        cfg = spec.side_config(sample.cutoff, side)
        out.append(local_fit(base, cfg).ghat)
    return float(out[0] - out[1])


def _sides(sample, spec, hc, methods):
    return (_side(sample, spec.side_config(sample.cutoff, RIGHT), hc, methods),
            _side(sample, spec.side_config(sample.cutoff, LEFT), hc, methods))


def rdd_moments(sample: RddSample, h: float | None = None, p: int = 1, kernel="triangular",
                hc: str = "hc3", spec: RddSpec | None = None) -> RddMoments:
    """Per-side mPLP moments and their combination for Q+ T+* - Q- T-*."""
    spec = _spec(h, p, kernel, spec)
    plus, minus = _sides(sample, spec, hc, ("mlp",))
    for s in (plus, minus):
        if s.scaling_error is not None:
            raise s.scaling_error
    return _rdd_moments_from(sample, spec, plus, minus)


def _rdd_moments_from(sample, spec, plus, minus) -> RddMoments:
    mp, mm = plus.moments["mlp"], minus.moments["mlp"]
    nh_ref = sample.n * spec.reference_bandwidth
    comb = combine(mp, mm, nh_ref)
    return RddMoments(estimate=plus.estimate - minus.estimate, bias_rd=comb.bias,
                      debiased_sd_rd=comb.debiased_sd, boot_sd_rd=comb.boot_sd,
                      q_plus=mp.q, q_minus=mm.q, plus=mp, minus=mm, combined=comb)


def rdd_ci(sample: RddSample, h: float | None = None, p: int = 1, kernel="triangular",
           hc: str = "hc3", alpha: float = 0.05, spec: RddSpec | None = None) -> ConfidenceInterval:
    """Modified prepivoted interval for the jump at the cutoff."""
    m = rdd_moments(sample, h, p, kernel, hc, spec)
    return analytic_prepivot_ci(m.estimate, m.combined, alpha)


RDD_METHODS = ("naive_gp", "naive_lp", "rbc_pgp", "plp", "mplp")
_NEEDS = {"naive_gp": "gp", "naive_lp": "lp", "rbc_pgp": "gp", "plp": "lp", "mplp": "mlp"}


def rdd_intervals(sample: RddSample, h: float | None = None, p: int = 1, kernel="triangular",
                  hc: str = "hc3", alpha: float = 0.05, methods=RDD_METHODS,
                  spec: RddSpec | None = None, plan: ResamplingPlan | None = None,
                  diagnostics: dict | None = None) -> dict[str, ConfidenceInterval | None]:
    """Every requested interval for the jump; mplp is None (and plp flagged) if Q cannot be formed."""
    spec = _spec(h, p, kernel, spec)
    for m in methods:
        if m not in _NEEDS:
            raise ValueError(f"unknown rdd method {m!r}; expected one of {RDD_METHODS}")
    need = tuple(k for k in METHODS if k in {_NEEDS[m] for m in methods})
    if "mlp" in need and "lp" not in need:
        need = need + ("lp",)  # fallback target
    plus, minus = _sides(sample, spec, hc, need)
    tau = plus.estimate - minus.estimate
    nh_ref = sample.n * spec.reference_bandwidth
    failed = plus.scaling_error is not None or minus.scaling_error is not None
    comb = {}
    for k in need:
        if k in plus.moments and k in minus.moments:
            comb[k] = combine(plus.moments[k], minus.moments[k], nh_ref)
    if diagnostics is not None:
        diagnostics.update(estimate=tau, n=sample.n, h_right=spec.side_config(sample.cutoff, RIGHT).bandwidth,
                           h_left=spec.side_config(sample.cutoff, LEFT).bandwidth)
        if "mlp" in plus.moments and "mlp" in minus.moments:
            diagnostics.update(q_plus=plus.moments["mlp"].q, q_minus=minus.moments["mlp"].q)
    out: dict[str, ConfidenceInterval | None] = {}
    for m in methods:
        k = _NEEDS[m]
        if m.startswith("naive"):
            out[m] = naive_bootstrap_ci(tau, comb[k], alpha, plan)
        elif k == "mlp" and failed:
            out[m] = None
        elif plan is not None:
            out[m] = resampled_prepivot_ci(tau, comb[k], alpha, plan)
        else:
            out[m] = analytic_prepivot_ci(tau, comb[k], alpha)
    if failed and "mplp" in methods:
        plp = out.get("plp")
        if plp is None:
            plp = (resampled_prepivot_ci(tau, comb["lp"], alpha, plan) if plan is not None
                   else analytic_prepivot_ci(tau, comb["lp"], alpha))
        out["plp"] = ConfidenceInterval(plp.lower, plp.upper, plp.estimate, plp.bias_correction,
                                        plp.se, plp.alpha, plp.method,
                                        plp.warnings + ("degenerate_scaling_mplp_unavailable",))
    return out
