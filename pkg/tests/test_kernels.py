from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from prepivot.errors import InvalidRange
from prepivot.kernels import KERNEL_NAMES, KernelSpec, eval_kernel, kernel_moment, moment_matrix

kernels = st.sampled_from(KERNEL_NAMES)


def test_examples():
    assert eval_kernel("epanechnikov", 0.0) == 0.75
    assert eval_kernel("triangular", 1.0) == 0.0
    assert eval_kernel("uniform", 0.3) == 0.5
    assert kernel_moment("epanechnikov", 2) == pytest.approx(0.2, abs=1e-15)
    assert kernel_moment("epanechnikov", 0, squared=True) == pytest.approx(0.6, abs=1e-15)


@pytest.mark.parametrize("name", KERNEL_NAMES)
def test_unit_mass_and_odd_moments(name):
    assert kernel_moment(name, 0) == pytest.approx(1.0, abs=1e-12)
    for j in (1, 3, 5):
        assert abs(kernel_moment(name, j)) < 1e-15


@pytest.mark.parametrize("name", KERNEL_NAMES)
def test_support_and_symmetry(name):
    u = np.linspace(-1.5, 1.5, 301)
    k = eval_kernel(name, u)
    assert np.all(k >= 0)
    assert np.all(k[np.abs(u) >= 1] == 0)
    np.testing.assert_allclose(k, eval_kernel(name, -u), atol=0, rtol=0)


def test_unknown_kernel():
    with pytest.raises(ValueError):
        KernelSpec("gaussian")


def test_invalid_range():
    with pytest.raises(InvalidRange):
        kernel_moment("uniform", 0, 0.5, 0.5)
    with pytest.raises(InvalidRange):
        kernel_moment("uniform", 0, 0.5, -0.5)
    with pytest.raises(InvalidRange):
        kernel_moment("uniform", 0, -2.0, 0.5)


@given(kernels, st.integers(0, 6), st.floats(-1, 1), st.floats(-1, 1), st.booleans())
def test_moments_match_quadrature(name, j, a, b, sq):
    lo, hi = min(a, b), max(a, b)
    if hi - lo < 1e-9:
        return
    f = (lambda u: eval_kernel(name, u) ** 2 * u**j) if sq else (lambda u: eval_kernel(name, u) * u**j)
    ref = quad(f, lo, hi, points=[0.0] if lo < 0 < hi else None, epsabs=1e-13, epsrel=1e-13)[0]
    assert kernel_moment(name, j, lo, hi, sq) == pytest.approx(ref, abs=1e-10)


def test_moment_matrix_is_hankel():
    m = moment_matrix("epanechnikov", 2, 0.0, 1.0)
    assert m.shape == (3, 3)
    assert m[0, 2] == m[1, 1] == m[2, 0]
    assert m[0, 0] == pytest.approx(0.5)
