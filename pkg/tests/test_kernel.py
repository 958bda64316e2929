import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.stats import truncnorm

from unhap import ConfigError
from unhap.kernel import (SIGMA_MIN, RaisedCosineKernel, TruncGaussKernel, grid_size,
                          kernel_class, kernel_from_dict, make_kernel)


def _fd(kernel, name, t, h=1e-6):
    values = kernel.params()
    idx = kernel.param_names.index(name)
    up, down = values.copy(), values.copy()
    up[idx] += h
    down[idx] -= h
    cls = type(kernel)
    k_up = cls(**dict(zip(kernel.param_names, up)), W=kernel.W)
    k_down = cls(**dict(zip(kernel.param_names, down)), W=kernel.W)
    return (k_up.evaluate(t) - k_down.evaluate(t)) / (2 * h)


def test_grid_size_tolerates_roundoff():
    assert grid_size(1.0, 0.01) == 100
    assert grid_size(1.0, 0.1) == 10
    assert grid_size(0.3, 0.1) == 3
    assert grid_size(1.0, 0.3) == 3


def test_truncated_gaussian_matches_scipy():
    k = TruncGaussKernel(alpha=1.7, m=0.3, sigma=0.2, W=1.0)
    t = np.linspace(0, 1, 11)
    a, b = (0 - 0.3) / 0.2, (1 - 0.3) / 0.2
    expected = 1.7 * truncnorm.pdf(t, a, b, loc=0.3, scale=0.2)
    np.testing.assert_allclose(k.evaluate(t), expected, rtol=1e-12)


def test_truncated_gaussian_integrates_to_alpha():
    k = TruncGaussKernel(alpha=0.6, m=0.05, sigma=0.3, W=1.0)
    assert quad(k.evaluate, 0, 1)[0] == pytest.approx(0.6, rel=1e-10)
    assert k.integral() == 0.6


def test_kernels_vanish_outside_support():
    tg = TruncGaussKernel(alpha=1.0, m=0.5, sigma=0.1, W=1.0)
    rc = RaisedCosineKernel(alpha=1.0, u=0.4, s=0.1, W=1.0)
    outside = np.array([-0.5, -1e-9, 1.0 + 1e-9, 3.0])
    assert np.all(tg.evaluate(outside) == 0)
    assert np.all(rc.evaluate(np.array([0.0, 0.39, 0.61, 1.0])) == 0)


def test_raised_cosine_hand_values():
    rc = RaisedCosineKernel(alpha=1.5, u=0.4, s=0.1, W=1.0)
    # peak 2 alpha at u + s, zero at both ends, alpha at the quarter points
    np.testing.assert_allclose(rc.evaluate([0.4, 0.45, 0.5, 0.55, 0.6]),
                               [0.0, 1.5, 3.0, 1.5, 0.0], atol=1e-12)
    assert quad(rc.evaluate, 0, 1, points=[0.4, 0.6])[0] == pytest.approx(2 * 1.5 * 0.1, rel=1e-10)
    assert rc.integral() == pytest.approx(0.3)


@pytest.mark.parametrize("kernel", [
    TruncGaussKernel(alpha=0.9, m=0.4, sigma=0.15, W=1.0),
    TruncGaussKernel(alpha=1.3, m=0.02, sigma=0.6, W=2.0),
    RaisedCosineKernel(alpha=0.7, u=0.2, s=0.3, W=1.0),
])
def test_parameter_gradients_match_finite_differences(kernel):
    t = np.linspace(0.013, kernel.W - 0.013, 37)
    grads = kernel.grad(t)
    for name in kernel.param_names:
        np.testing.assert_allclose(grads[name], _fd(kernel, name, t), rtol=1e-6, atol=1e-7,
                                   err_msg=name)


def test_discretize_stores_lag_zero_and_lags():
    k = TruncGaussKernel(alpha=1.0, m=0.5, sigma=0.1, W=1.0)
    d = k.discretize(0.01)
    assert d.L == 100
    assert len(d.values) == 101
    np.testing.assert_allclose(d.values, k.evaluate(np.arange(101) * 0.01))
    np.testing.assert_array_equal(d.lags, d.values[1:])
    assert set(d.grads) == {"alpha", "m", "sigma"}


def test_discretize_rejects_step_larger_than_support():
    k = TruncGaussKernel(alpha=1.0, m=0.5, sigma=0.1, W=1.0)
    with pytest.raises(ConfigError):
        k.discretize(1.5)
    with pytest.raises(ConfigError):
        k.discretize(0.0)


def test_projection_clips_to_feasible_box():
    k = TruncGaussKernel.project(-0.3, 1.7, 1e-6, 1.0)
    assert (k.alpha, k.m, k.sigma) == (0.0, 1.0, SIGMA_MIN)
    rc = RaisedCosineKernel.project(0.5, 0.8, 0.3, 1.0)
    assert rc.u + 2 * rc.s <= 1.0 + 1e-12
    assert rc.s == pytest.approx(0.1)


def test_invalid_kernels_rejected():
    with pytest.raises(ConfigError):
        TruncGaussKernel(alpha=1.0, m=0.5, sigma=0.0)
    with pytest.raises(ConfigError):
        RaisedCosineKernel(alpha=1.0, u=0.6, s=0.3, W=1.0)
    with pytest.raises(ConfigError):
        kernel_class("exponential")


def test_family_aliases_and_dict_round_trip():
    assert kernel_class("TruncGauss") is TruncGaussKernel
    assert kernel_class("raised-cosine") is RaisedCosineKernel
    k = make_kernel("raised_cosine", alpha=0.5, u=0.1, s=0.2)
    assert kernel_from_dict(k.as_dict()) == k


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(0, 5), m=st.floats(0, 1), sigma=st.floats(SIGMA_MIN, 1),
       t=st.floats(-2, 3))
def test_truncated_gaussian_nonnegative(alpha, m, sigma, t):
    value = float(TruncGaussKernel(alpha=alpha, m=m, sigma=sigma).evaluate(t))
    assert value >= 0 and math.isfinite(value)
    if not 0 <= t <= 1:
        assert value == 0
