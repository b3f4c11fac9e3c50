"""Compact-support kernels on (-1, 1) and their exact moments.

Every kernel here is a piecewise polynomial, so moments of K and K**2 are
computed from polynomial antiderivatives rather than by quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import InvalidRange

KERNEL_NAMES = ("triangular", "uniform", "epanechnikov", "biweight", "triweight")

# (lower, upper, ascending coefficients) pieces covering [-1, 1]
_PIECES: dict[str, tuple[tuple[float, float, tuple[float, ...]], ...]] = {
    "triangular": ((-1.0, 0.0, (1.0, 1.0)), (0.0, 1.0, (1.0, -1.0))),
    "uniform": ((-1.0, 1.0, (0.5,)),),
    "epanechnikov": ((-1.0, 1.0, (0.75, 0.0, -0.75)),),
    "biweight": ((-1.0, 1.0, tuple(15.0 / 16.0 * c for c in (1.0, 0.0, -2.0, 0.0, 1.0))),),
    "triweight": (
        (-1.0, 1.0, tuple(35.0 / 32.0 * c for c in (1.0, 0.0, -3.0, 0.0, 3.0, 0.0, -1.0))),
    ),
}


@dataclass(frozen=True)
class KernelSpec:
    """A named kernel supported on the open interval (-1, 1)."""

    name: str

    def __post_init__(self):
        if self.name not in _PIECES:
            raise ValueError(
                f"unknown kernel {self.name!r}; expected one of {', '.join(KERNEL_NAMES)}"
            )

    @property
    def support(self) -> tuple[float, float]:
        return (-1.0, 1.0)

    @property
    def kinks(self) -> tuple[float, ...]:
        """Interior breakpoints where the kernel is not smooth."""
        return (0.0,) if self.name == "triangular" else ()

    def __call__(self, u):
        return eval_kernel(self, u)

    def moment(self, power: int, lower: float = -1.0, upper: float = 1.0,
               squared: bool = False) -> float:
        return kernel_moment(self, power, lower, upper, squared)


def get_kernel(kernel: str | KernelSpec) -> KernelSpec:
    if isinstance(kernel, KernelSpec):
        return kernel
    return KernelSpec(str(kernel).strip().lower())


def eval_kernel(kernel: str | KernelSpec, u):
    """K(u), vectorised; exactly zero for |u| >= 1."""
    kernel = get_kernel(kernel)
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    inside = a < 1.0
    name = kernel.name
    if name == "triangular":
        out = 1.0 - a
    elif name == "uniform":
        out = np.full_like(u, 0.5)
    elif name == "epanechnikov":
        out = 0.75 * (1.0 - u * u)
    elif name == "biweight":
        t = 1.0 - u * u
        out = 0.9375 * t * t
    else:
        t = 1.0 - u * u
        out = 1.09375 * t * t * t
    out = np.where(inside, out, 0.0)
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def _moment_cached(name: str, power: int, lower: float, upper: float, squared: bool) -> float:
    total = 0.0
    for a, b, coef in _PIECES[name]:
        lo, hi = max(a, lower), min(b, upper)
        if hi <= lo:
            continue
        c = np.asarray(coef)
        if squared:
            c = P.polymul(c, c)
        c = P.polymul(c, np.r_[np.zeros(power), 1.0])
        anti = P.polyint(c)
        total += P.polyval(hi, anti) - P.polyval(lo, anti)
    return float(total)


def kernel_moment(kernel: str | KernelSpec, power: int, lower: float = -1.0,
                  upper: float = 1.0, squared: bool = False) -> float:
    """Integral of K(u)**(1 or 2) * u**power over [lower, upper].

    Raises InvalidRange unless -1 <= lower < upper <= 1.
    """
    kernel = get_kernel(kernel)
    if power < 0 or int(power) != power:
        raise ValueError("power must be a non-negative integer")
    lower, upper = float(lower), float(upper)
    if not lower < upper:
        raise InvalidRange(f"lower={lower} must be strictly below upper={upper}")
    if lower < -1.0 or upper > 1.0:
        raise InvalidRange(f"[{lower}, {upper}] is not inside [-1, 1]")
    return _moment_cached(kernel.name, int(power), lower, upper, bool(squared))


def moment_matrix(kernel: str | KernelSpec, order: int, lower: float = -1.0,
                  upper: float = 1.0) -> np.ndarray:
    """(order+1) x (order+1) matrix of int r(u) r(u)' K(u) du over [lower, upper]."""
    m = [kernel_moment(kernel, j, lower, upper) for j in range(2 * order + 1)]
    idx = np.add.outer(np.arange(order + 1), np.arange(order + 1))
    return np.asarray(m)[idx]
