"""Bias-corrected residuals from the order-(p+1) local fit at the evaluation point."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LeverageOne
from .locpoly import FitConfig, Sample, _factor, _unit, _window, side_mask

HC_TYPES = ("hc0", "hc1", "hc2", "hc3")
LEVERAGE_TOL = 1e-12


@dataclass(frozen=True)
class HigherOrderFit:
    """Order-(p+1) kernel-weighted fit at the point.

    ``scaled_beta`` are coefficients on u**j with u = (x - point)/h; ``gp_weights`` are
    nh * iota_{p+1}' Gamma_{p+1}^{-1} r_{p+1}(u_i) K(u_i), i.e. the GP bias-correction
    weights before multiplication by C_n.
    """

    scaled_beta: np.ndarray
    beta: np.ndarray
    leverages: np.ndarray
    gp_weights: np.ndarray
    effective_n: int


@dataclass(frozen=True)
class ResidualVector:
    values: np.ndarray
    hc: str
    leverages: np.ndarray


def higher_order_fit(sample: Sample, config: FitConfig) -> HigherOrderFit:
    q = config.order + 1
    h = config.bandwidth
    nh = sample.n * h
    idx, u = _window(sample, config)
    Q, R, sk = _factor(u, q, config.kernel, config)
    scaled = np.linalg.solve(R, Q.T @ (sk * sample.y[idx]))
    lev = np.zeros(sample.n)
    lev[idx] = np.einsum("ik,ik->i", Q, Q)
    a = np.linalg.solve(R.T, _unit(q, q))
    gp = np.zeros(sample.n)
    gp[idx] = nh * (Q @ a) * sk
    return HigherOrderFit(scaled_beta=scaled, beta=scaled / h ** np.arange(q + 1),
                          leverages=lev, gp_weights=gp, effective_n=int(idx.size))


def bc_residuals(sample: Sample, config: FitConfig, hc: str = "hc3",
                 fit: HigherOrderFit | None = None) -> ResidualVector:
    """Residuals y_i - r_{p+1}(x_i - point)' beta_{p+1} with an HC adjustment.

    Residuals are reported on the 2h reach of the point (the support of every weight
    family built on top of them) and on the active side; elsewhere they are 0.
    Leverages come from the same kernel-weighted order-(p+1) regression and are 0 for
    observations outside its window.
    """
    hc = hc.lower()
    if hc not in HC_TYPES:
        raise ValueError(f"hc must be one of {HC_TYPES}, got {hc!r}")
    fit = higher_order_fit(sample, config) if fit is None else fit
    u = (sample.x - config.point) / config.bandwidth
    reach = (np.abs(u) < 2.0) & side_mask(sample.x, config.point, config.side)
    e = np.zeros(sample.n)
    ur = u[reach]
    e[reach] = sample.y[reach] - np.vander(ur, fit.scaled_beta.size, increasing=True) @ fit.scaled_beta
    lev = fit.leverages
    if hc == "hc0":
        values = e
    elif hc == "hc1":
        dof = fit.effective_n - config.order - 2
        if dof <= 0:
            raise LeverageOne(
                f"HC1 needs more than {config.order + 2} in-window observations, got {fit.effective_n}")
        values = e * np.sqrt(fit.effective_n / dof)
    else:
        if np.any(lev >= 1.0 - LEVERAGE_TOL):
            raise LeverageOne("an in-window observation has leverage 1 (isolated point)")
        values = e / np.sqrt(1.0 - lev) if hc == "hc2" else e / (1.0 - lev)
    return ResidualVector(values=values, hc=hc, leverages=lev)
