"""Prepivoted bootstrap confidence intervals for local polynomial regression and sharp RDD."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import PrepivotError
from .kernels import KERNEL_NAMES, KernelSpec, eval_kernel, kernel_moment
from .locpoly import (FitConfig, Sample, curvature_constant, double_smooth, local_fit,
                      local_weights, lp_bc_weights, q_factor)
from .residuals import bc_residuals
from .bootmoments import BootstrapMoments, all_moments, gp_moments, lp_moments, mlp_moments
from .intervals import (ConfidenceInterval, PrepivotCdf, ResamplingPlan, analytic_prepivot_ci,
                        conventional_ci, local_intervals, naive_bootstrap_ci,
                        prepivot_cdf_apply, rbc_ci, resampled_prepivot_ci)
from .rdd import RddSample, RddSpec, ate_estimate, rdd_ci, rdd_intervals, rdd_moments
from .asymconst import ConstantsReport, kernel_constants

__all__ = [
    "__version__", "PrepivotError", "KERNEL_NAMES", "KernelSpec", "eval_kernel", "kernel_moment",
    "FitConfig", "Sample", "curvature_constant", "double_smooth", "local_fit", "local_weights",
    "lp_bc_weights", "q_factor", "bc_residuals", "BootstrapMoments", "all_moments", "gp_moments",
    "lp_moments", "mlp_moments", "ConfidenceInterval", "PrepivotCdf", "ResamplingPlan",
    "analytic_prepivot_ci", "conventional_ci", "local_intervals", "naive_bootstrap_ci",
    "prepivot_cdf_apply", "rbc_ci", "resampled_prepivot_ci", "RddSample", "RddSpec",
    "ate_estimate", "rdd_ci", "rdd_intervals", "rdd_moments", "ConstantsReport",
    "kernel_constants",
]
