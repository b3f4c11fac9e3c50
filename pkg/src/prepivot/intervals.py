"""Conventional, naive-bootstrap and prepivoted confidence intervals.

Bootstrap statistics live on the sqrt(nh) scale, T* = sqrt(nh)(g* - ghat), and
intervals are mapped back through ghat - (nh)^{-1/2} * quantile. Under the
Gaussian wild bootstrap T* is exactly N(B, v^2), so every interval has a closed
form; the resampling path exists to cross-check that and to support
non-Gaussian multipliers.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .bootmoments import BootstrapMoments
from .errors import InvalidAlpha, InvalidProbability, RngFailure
from .locpoly import FitConfig, Sample, _window, derivative_estimate, local_fit
from .kernels import eval_kernel
from .residuals import ResidualVector, bc_residuals

METHOD_TAGS = ("conventional", "naive_gp", "naive_lp", "rbc_pgp", "plp", "mplp")
PREPIVOT_TAG = {"gp": "rbc_pgp", "lp": "plp", "mlp": "mplp"}
NAIVE_TAG = {"gp": "naive_gp", "lp": "naive_lp"}
MULTIPLIERS = ("gaussian", "rademacher", "mammen")
CHUNK = 4096  # replications per counter-based substream


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def normal_quantile(p):
    return ndtri(p)


def normal_cdf(z):
    return ndtr(z)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    estimate: float
    bias_correction: float
    se: float
    alpha: float
    method: str
    warnings: tuple[str, ...] = ()

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        d = asdict(self)
        d["warnings"] = list(self.warnings)
        return d


@dataclass(frozen=True)
class PrepivotCdf:
    """H(u) = Phi(Phi^{-1}(u) / m_hat), the limiting law of the naive bootstrap p-value."""

    m_hat: float

    def __post_init__(self):
        if not (np.isfinite(self.m_hat) and self.m_hat > 0):
            raise ValueError(f"m_hat must be positive and finite, got {self.m_hat}")

    def __call__(self, u):
        return prepivot_cdf_apply(self.m_hat, u)

    def inverse(self, a):
        return prepivot_cdf_apply(self.m_hat, a, inverse=True)


@dataclass(frozen=True)
class ResamplingPlan:
    replications: int = 999
    multiplier: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if int(self.replications) != self.replications or self.replications < 1:
            raise ValueError(f"replications must be an integer >= 1, got {self.replications}")
        if self.multiplier not in MULTIPLIERS:
            raise ValueError(f"multiplier must be one of {MULTIPLIERS}, got {self.multiplier!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def prepivot_cdf_apply(m_hat: float, u, inverse: bool = False):
    """H(u) = Phi(Phi^{-1}(u)/m_hat); with inverse=True, H^{-1}(a) = Phi(m_hat * Phi^{-1}(a))."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(~((u_arr > 0.0) & (u_arr < 1.0))):
        raise InvalidProbability(f"probabilities must lie in (0, 1), got {u}")
    if not m_hat > 0:
        raise ValueError(f"m_hat must be positive, got {m_hat}")
    z = ndtri(u_arr)
    out = ndtr(z * m_hat if inverse else z / m_hat)
    return float(out) if out.ndim == 0 else out


def conventional_ci(estimate: float, sd_v1: float, nh: float, alpha: float = 0.05) -> ConfidenceInterval:
    """Bias-ignoring interval ghat +- z_{1-alpha/2} (nh)^{-1/2} v1."""
    alpha = _check_alpha(alpha)
    if not (sd_v1 > 0 and nh > 0):
        raise ValueError("sd_v1 and nh must be positive")
    se = sd_v1 / np.sqrt(nh)
    half = float(ndtri(1.0 - alpha / 2.0)) * se
    return ConfidenceInterval(estimate - half, estimate + half, float(estimate), 0.0, float(se),
                              alpha, "conventional")


def analytic_prepivot_ci(estimate: float, moments: BootstrapMoments,
                         alpha: float = 0.05) -> ConfidenceInterval:
    """[(ghat - (nh)^{-1/2} B) +- z_{1-alpha/2} (nh)^{-1/2} v_P] for the Gaussian wild bootstrap."""
    alpha = _check_alpha(alpha)
    bc = moments.bias_correction
    se = moments.se
    half = float(ndtri(1.0 - alpha / 2.0)) * se
    center = estimate - bc
    return ConfidenceInterval(center - half, center + half, float(estimate), float(bc), float(se),
                              alpha, PREPIVOT_TAG[moments.method])


def _naive_tag(moments: BootstrapMoments) -> str:
    try:
        return NAIVE_TAG[moments.method]
    except KeyError:
        raise ValueError(f"no naive interval is defined for method {moments.method!r}") from None


def draw_multipliers(plan: ResamplingPlan, chunk_index: int, size: tuple[int, int]) -> np.ndarray:
    """Multipliers for one chunk; stream keyed by (seed, chunk index) so order of evaluation is free."""
    try:
        gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(plan.seed), chunk_index])))
        if plan.multiplier == "gaussian":
            return gen.standard_normal(size)
        if plan.multiplier == "rademacher":
            return np.where(gen.random(size) < 0.5, -1.0, 1.0)
        r5 = np.sqrt(5.0)
        lo, hi = -(r5 - 1.0) / 2.0, (r5 + 1.0) / 2.0
        return np.where(gen.random(size) < (r5 + 1.0) / (2.0 * r5), lo, hi)
    except (ValueError, TypeError, OverflowError) as exc:  # pragma: no cover
        raise RngFailure(f"multiplier generation failed: {exc}") from exc


def bootstrap_draws(moments: BootstrapMoments, plan: ResamplingPlan) -> np.ndarray:
    """B draws of T* = B_hat + sum_i core_i e*_i (fixed design wild bootstrap)."""
    if moments.core is None:
        raise ValueError("moments carry no core vector; resampling needs one")
    core = moments.core[moments.core != 0.0]
    out = np.empty(plan.replications)
    for k, start in enumerate(range(0, plan.replications, CHUNK)):
        stop = min(start + CHUNK, plan.replications)
        e = draw_multipliers(plan, k, (stop - start, core.size))
        out[start:stop] = moments.bias + e @ core
    return out


def _from_draws(estimate, moments, alpha, draws, lo_level, hi_level, method, warnings):
    q_lo, q_hi = np.quantile(draws, [lo_level, hi_level], method="linear")
    scale = 1.0 / np.sqrt(moments.nh)
    lower = estimate - scale * q_hi
    upper = estimate - scale * q_lo
    return ConfidenceInterval(float(lower), float(upper), float(estimate),
                              float(moments.bias_correction), float(moments.se), alpha, method,
                              tuple(warnings))


def naive_bootstrap_ci(estimate: float, moments: BootstrapMoments, alpha: float = 0.05,
                       plan: ResamplingPlan | None = None) -> ConfidenceInterval:
    """Equal-tailed percentile interval [ghat - (nh)^{-1/2} L^{-1}(1-a/2), ghat - (nh)^{-1/2} L^{-1}(a/2)].

    Without a plan L is the exact Gaussian law N(B, v^2) of T*. The reported ``se`` is
    (nh)^{-1/2} v, the bootstrap standard deviation.
    """
    alpha = _check_alpha(alpha)
    method = _naive_tag(moments)
    scale = 1.0 / np.sqrt(moments.nh)
    if plan is None:
        z = float(ndtri(1.0 - alpha / 2.0))
        b, v = moments.bias, moments.boot_sd
        return ConfidenceInterval(estimate - scale * (b + v * z), estimate - scale * (b - v * z),
                                  float(estimate), float(scale * b), float(scale * v), alpha, method)
    draws = bootstrap_draws(moments, plan)
    warnings = ["single_replication"] if plan.replications == 1 else []
    ci = _from_draws(estimate, moments, alpha, draws, alpha / 2.0, 1.0 - alpha / 2.0, method, warnings)
    return ConfidenceInterval(ci.lower, ci.upper, ci.estimate, ci.bias_correction,
                              float(scale * moments.boot_sd), alpha, method, ci.warnings)


def resampled_prepivot_ci(estimate: float, moments: BootstrapMoments, alpha: float,
                          plan: ResamplingPlan) -> ConfidenceInterval:
    """Prepivoted percentile interval with quantile levels H^{-1}(alpha/2), H^{-1}(1-alpha/2)."""
    alpha = _check_alpha(alpha)
    if plan is None:
        raise ValueError("resampled_prepivot_ci needs a ResamplingPlan")
    h = PrepivotCdf(moments.m_hat)
    lo_level = float(h.inverse(alpha / 2.0))
    hi_level = float(h.inverse(1.0 - alpha / 2.0))
    draws = bootstrap_draws(moments, plan)
    warnings = ["single_replication"] if plan.replications == 1 else []
    return _from_draws(estimate, moments, alpha, draws, lo_level, hi_level,
                       PREPIVOT_TAG[moments.method], warnings)


def rbc_ci(sample: Sample, config: FitConfig, alpha: float = 0.05, hc: str = "hc3",
           residuals: ResidualVector | None = None) -> ConfidenceInterval:
    """Textbook robust bias-corrected interval, assembled from its own ingredients.

    Bias h^{p+1} g^{(p+1)} C_n/(p+1)! from a separate order-(p+1) fit and the standard
    error from the explicit RBC weights built by an SVD pseudo-inverse. Shares no code path
    with the bootstrap moments beyond the order-p/(p+1) local fits.
    """
    from math import factorial

    alpha = _check_alpha(alpha)
    p, h = config.order, config.bandwidth
    nh = sample.n * h
    fit_p = local_fit(sample, config)
    fit_q = local_fit(sample, config, order=p + 1)
    c_n = fit_p.curvature
    bias = h ** (p + 1) * derivative_estimate(fit_q, p + 1) * c_n / factorial(p + 1)
    idx, u = _window(sample, config)
    sk = np.sqrt(eval_kernel(config.kernel, u))
    # SVD pseudo-inverse of the sqrt(K)-weighted design: nh * iota' Gamma^{-1} r(u) K(u)
    pinv = np.linalg.pinv(sk[:, None] * np.vander(u, p + 2, increasing=True))
    w_rbc = fit_p.weights.values[idx] - c_n * nh * pinv[p + 1] * sk
    if residuals is None:
        residuals = bc_residuals(sample, config, hc=hc)
    eps = residuals.values[idx]
    se = float(np.sqrt(np.sum(w_rbc**2 * eps**2)) / nh)
    half = float(ndtri(1.0 - alpha / 2.0)) * se
    center = fit_p.ghat - bias
    return ConfidenceInterval(center - half, center + half, fit_p.ghat, float(bias), se, alpha, "rbc_pgp")


__all__ = [
    "ConfidenceInterval", "PrepivotCdf", "ResamplingPlan", "METHOD_TAGS", "MULTIPLIERS",
    "conventional_ci", "prepivot_cdf_apply", "analytic_prepivot_ci", "naive_bootstrap_ci",
    "resampled_prepivot_ci", "rbc_ci", "bootstrap_draws", "draw_multipliers",
    "normal_quantile", "normal_cdf", "local_intervals", "LOCAL_METHODS",
]


LOCAL_METHODS = ("conventional", "naive_gp", "naive_lp", "rbc_pgp", "plp", "mplp")
_NEEDS = {"conventional": "gp", "naive_gp": "gp", "naive_lp": "lp", "rbc_pgp": "gp",
          "plp": "lp", "mplp": "mlp"}


def local_intervals(sample: Sample, config: FitConfig, alpha: float = 0.05, hc: str = "hc3",
                    methods=LOCAL_METHODS, plan: ResamplingPlan | None = None,
                    diagnostics: dict | None = None) -> dict[str, ConfidenceInterval | None]:
    """Every requested interval at config.point from one shared pass over the data.

    If Q_n cannot be formed the mplp entry is None and the plp interval carries the
    ``degenerate_scaling_mplp_unavailable`` warning.
    """
    from .bootmoments import analyze, moments_from_analysis
    from .errors import DegenerateScaling

    alpha = _check_alpha(alpha)
    for m in methods:
        if m not in _NEEDS:
            raise ValueError(f"unknown method {m!r}; expected one of {LOCAL_METHODS}")
    need = {_NEEDS[m] for m in methods}
    if "mlp" in need:
        need.add("lp")
    a = analyze(sample, config, hc=hc, double=bool(need - {"gp"}))
    mom, scaling = {}, None
    for k in ("gp", "lp", "mlp"):
        if k in need:
            try:
                mom[k] = moments_from_analysis(a, k)
            except DegenerateScaling as exc:
                scaling = exc
    if diagnostics is not None:
        diagnostics.update(estimate=a.estimate, n=sample.n, n_eff=int(np.count_nonzero(a.weights)),
                           h=config.bandwidth, C_n=a.curvature)
        if a.smooth is not None:
            diagnostics.update(C_LP_n=a.smooth.curvature_lp)
        if "mlp" in mom:
            diagnostics.update(Q_n=mom["mlp"].q)
    est = a.estimate
    out: dict[str, ConfidenceInterval | None] = {}
    for m in methods:
        k = _NEEDS[m]
        if m == "conventional":
            out[m] = conventional_ci(est, mom["gp"].boot_sd, mom["gp"].nh, alpha)
        elif m.startswith("naive"):
            out[m] = naive_bootstrap_ci(est, mom[k], alpha, plan)
        elif k not in mom:
            out[m] = None
        elif plan is not None:
            out[m] = resampled_prepivot_ci(est, mom[k], alpha, plan)
        else:
            out[m] = analytic_prepivot_ci(est, mom[k], alpha)
    if scaling is not None and "mplp" in methods:
        if diagnostics is not None:
            diagnostics.setdefault("warnings", []).append(scaling.to_dict())
        plp = out.get("plp") or (resampled_prepivot_ci(est, mom["lp"], alpha, plan) if plan is not None
                                 else analytic_prepivot_ci(est, mom["lp"], alpha))
        out["plp"] = ConfidenceInterval(plp.lower, plp.upper, plp.estimate, plp.bias_correction,
                                        plp.se, plp.alpha, plp.method,
                                        plp.warnings + ("degenerate_scaling_mplp_unavailable",))
    return out
