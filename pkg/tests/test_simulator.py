import numpy as np
import pytest
from scipy.stats import kstest, truncnorm

from unhap import ConfigError, MarkedEvent, SimConfig, builtin_mark_model, simulate_mixture
from unhap.kernel import RaisedCosineKernel, TruncGaussKernel
from unhap.simulator import simulate_child_times, thinning_bound

SHAPE = TruncGaussKernel(alpha=1.0, m=0.5, sigma=0.1)


def _cfg(**kw):
    base = dict(mu=0.4, alpha=0.75, kernel=SHAPE, mark_model=builtin_mark_model("identity-linear"),
                mu_tilde=0.3, T=200.0, seed=0)
    return SimConfig(**{**base, **kw})


def test_branching_ratio_and_stability_check():
    assert _cfg().branching_ratio == pytest.approx(0.5)          # 0.75 * 1 * 2/3
    assert _cfg(alpha=1.45).branching_ratio == pytest.approx(1.45 * 2 / 3)
    with pytest.raises(ConfigError, match="unstable"):
        _cfg(alpha=1.5)
    with pytest.raises(ConfigError):
        _cfg(mu=-0.1)
    assert _cfg().omega_integral == pytest.approx(0.5)
    assert _cfg().true_kernel.alpha == 0.75


def test_same_seed_same_sequence():
    a, b = simulate_mixture(_cfg(seed=3)), simulate_mixture(_cfg(seed=3))
    np.testing.assert_array_equal(a.times[0], b.times[0])
    np.testing.assert_array_equal(a.marks[0], b.marks[0])
    np.testing.assert_array_equal(a.labels[0], b.labels[0])
    assert not np.array_equal(a.times[0][:5], simulate_mixture(_cfg(seed=4)).times[0][:5])


def test_labels_generations_and_ranges():
    seq = simulate_mixture(_cfg(seed=1))
    t, k, lab, gen = seq.times[0], seq.marks[0], seq.labels[0], seq.gens[0]
    assert np.all(np.diff(t) > 0) and t[0] >= 0 and t[-1] <= 200
    assert np.all((k >= 0) & (k <= 1))
    np.testing.assert_array_equal(lab == 0, gen == -1)
    assert gen.max() >= 1
    # structured marks follow f1 = 2k, noise marks f0 = 2 - 2k
    assert np.mean(k[lab == 1]) > 0.55 and np.mean(k[lab == 0]) < 0.45


def test_pure_noise_and_pure_immigrants():
    noise = simulate_mixture(_cfg(mu=0.0, mu_tilde=1.0, T=100.0))
    assert noise.labels[0].sum() == 0
    imm = simulate_mixture(_cfg(alpha=0.0, mu_tilde=0.0, T=100.0))
    assert np.all(imm.labels[0] == 1) and np.all(imm.gens[0] == 0)


def test_poisson_counts_have_the_right_mean():
    counts = [simulate_mixture(_cfg(mu=0.0, mu_tilde=1.0, T=100.0, seed=s)).n_events() for s in range(300)]
    # standard error of the mean is 10 / sqrt(300) ~ 0.58
    assert np.mean(counts) == pytest.approx(100.0, abs=3.0)


def test_children_follow_the_kernel_shape():
    rng = np.random.default_rng(0)
    parent = MarkedEvent(t=5.0, kappa=1.0)
    kids = simulate_child_times(parent, 5000.0, SHAPE, rng)
    lags = kids - 5.0
    assert np.all((lags > 0) & (lags <= 1.0))
    # the expected number of children is rate_scale * int(phi) = 5000
    assert len(kids) == pytest.approx(5000, abs=5 * np.sqrt(5000))
    a, b = -0.5 / 0.1, 0.5 / 0.1
    assert kstest(lags, truncnorm(a, b, loc=0.5, scale=0.1).cdf).pvalue > 1e-3
    assert len(simulate_child_times(parent, 0.0, SHAPE, rng)) == 0


def test_thinning_bound_dominates_kernel():
    for k in (SHAPE, RaisedCosineKernel(alpha=1.0, u=0.4, s=0.1), TruncGaussKernel(1.0, 0.0, 0.05)):
        t = np.linspace(0, 1, 100_001)
        assert thinning_bound(k) >= k.evaluate(t).max()
