from __future__ import annotations

import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=15, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from prepivot.kernels import eval_kernel  # noqa: E402


def lstsq_weights(x, point, h, p, kernel, n_total=None, mask=None):
    """Definition-level weights: w_i = nh * d ghat / d y_i from a weighted lstsq solve.

    Solved with np.linalg.lstsq on the unscaled sqrt(K) * (x - point)^j design; independent
    of the package's QR path.
    """
    x = np.asarray(x, float)
    n = x.size if n_total is None else n_total
    k = eval_kernel(kernel, (x - point) / h)
    if mask is not None:
        k = np.where(mask, k, 0.0)
    X = np.vander(x - point, p + 1, increasing=True)
    A = np.sqrt(k)[:, None] * X
    # ghat = e0' pinv(A) sqrt(K) y
    pinv = np.linalg.lstsq(A, np.eye(x.size), rcond=None)[0]
    return n * h * pinv[0] * np.sqrt(k)


def lstsq_fit(x, y, point, h, p, kernel, mask=None):
    x = np.asarray(x, float)
    k = eval_kernel(kernel, (x - point) / h)
    if mask is not None:
        k = np.where(mask, k, 0.0)
    A = np.sqrt(k)[:, None] * np.vander(x - point, p + 1, increasing=True)
    return np.linalg.lstsq(A, np.sqrt(k) * y, rcond=None)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def uniform_design(n, lo=-1.0, hi=1.0, seed=0):
    return np.sort(np.random.default_rng(seed).uniform(lo, hi, n))


def grid(n, lo=-1.0, hi=1.0):
    """Midpoint grid: n equally spaced points strictly inside (lo, hi)."""
    return lo + (hi - lo) * (np.arange(n) + 0.5) / n


# ------------------------------------------------------------------ bootstrap oracle

def oracle_residuals(x, y, point, h, p, kernel, mask=None):
    """HC3 residuals of the order-(p+1) lstsq fit at ``point``, on the 2h reach, 0 elsewhere."""
    x = np.asarray(x, float)
    u = (x - point) / h
    active = np.ones(x.size, bool) if mask is None else mask
    k = np.where(active, eval_kernel(kernel, u), 0.0)
    X = np.vander(x - point, p + 2, increasing=True)
    A = np.sqrt(k)[:, None] * X
    beta = np.linalg.lstsq(A, np.sqrt(k) * y, rcond=None)[0]
    hat = A @ np.linalg.pinv(A)
    lev = np.diag(hat)
    e = np.where((np.abs(u) < 2) & active, y - X @ beta, 0.0)
    return e / (1.0 - lev)


class LinearStat:
    """A statistic linear in y, represented by its coefficient vector."""

    def __init__(self, fn, n):
        self.coef = np.array([fn(np.eye(n)[i]) for i in range(n)])
        self.offset = fn(np.zeros(n))

    def __call__(self, y):
        return y @ self.coef + self.offset


def oracle_pieces(x, y, point, h, p, kernel, mask=None, n_total=None):
    """Definition-level ingredients on one side (or the whole line).

    Returns dict with ghat, the GP bootstrap truth g_gp (order-(p+1) intercept), GP and LP
    bootstrap means m_gp, m_lp, Q, residuals, and linear maps for ghat, B_GP and B_LP applied to new y.
    """
    x = np.asarray(x, float)
    n = x.size if n_total is None else n_total
    nh = n * h
    active = np.ones(x.size, bool) if mask is None else mask
    wt = lstsq_weights(x, point, h, p, kernel, n_total=n, mask=active)

    def ghat_at(yy, at):
        b = lstsq_fit(x, yy, at, h, p, kernel, mask=active)
        return b[0]

    def gp_bias(yy):
        b = lstsq_fit(x, yy, point, h, p + 1, kernel, mask=active)
        cn = np.sum(wt * ((x - point) / h) ** (p + 1)) / nh
        return np.sqrt(nh) * h ** (p + 1) * b[p + 1] * cn

    inwin = np.flatnonzero(wt != 0)

    def lp_bias(yy):
        g0 = ghat_at(yy, point)
        g = np.array([ghat_at(yy, x[j]) for j in inwin])
        return np.sqrt(nh) * (wt[inwin] @ g / nh - g0)

    def c_n_at(at):
        w = lstsq_weights(x, at, h, p, kernel, n_total=n, mask=active)
        return np.sum(w * ((x - at) / h) ** (p + 1)) / nh

    c_n = c_n_at(point)
    c_lp = np.sum(wt[inwin] * np.array([c_n_at(x[j]) for j in inwin])) / nh
    b_gp = lstsq_fit(x, y, point, h, p + 1, kernel, mask=active)
    m_gp = np.vander(x - point, p + 2, increasing=True) @ b_gp
    m_lp = np.array([ghat_at(y, x[i]) if active[i] else 0.0 for i in range(x.size)])
    return dict(
        nh=nh, ghat=ghat_at(y, point), g_gp=b_gp[0], m_gp=m_gp, m_lp=m_lp, q=c_n / c_lp,
        eps=oracle_residuals(x, y, point, h, p, kernel, mask=active),
        G=LinearStat(lambda yy: ghat_at(yy, point), x.size),
        BGP=LinearStat(gp_bias, x.size), BLP=LinearStat(lp_bias, x.size))


def wild_draws(mean, eps, maps, draws=1_000_000, seed=7, chunk=100_000):
    """Run the Gaussian wild bootstrap y* = mean + eps * e; returns per-map (mean, sd) over draws.

    ``maps`` is a dict name -> (coef, offset) of linear statistics of y*.
    """
    gen = np.random.default_rng(seed)
    n = mean.size
    acc = {k: [0.0, 0.0] for k in maps}
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        ys = mean[None, :] + eps[None, :] * gen.standard_normal((m, n))
        for k, (coef, off) in maps.items():
            t = ys @ coef + off
            acc[k][0] += t.sum()
            acc[k][1] += (t * t).sum()
        done += m
    out = {}
    for k, (s1, s2) in acc.items():
        mu = s1 / draws
        out[k] = (mu, np.sqrt(max(s2 / draws - mu * mu, 0.0)))
    return out
