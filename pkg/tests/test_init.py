import numpy as np
import pytest

from unhap import (ConfigError, DataError, EventSequence, InitConfig, builtin_mark_model,
                   moment_match, random_init)
from unhap.init import delays
from unhap.kernel import SIGMA_MIN

SOURCE = [0.5, 1.2, 2.0, 3.0]
TARGET = [1.1, 1.5, 2.5, 3.2]


def test_delays_absolute_window():
    # predecessors must satisfy W < t < t_n; target 1.1 has none
    np.testing.assert_allclose(delays(TARGET, SOURCE, 1.0, "max"), [0.3, 0.5, 0.2])
    np.testing.assert_allclose(delays(TARGET, SOURCE, 1.0, "mean"), [0.3, 0.9, 3.2 - 6.2 / 3])


def test_delays_relative_window():
    # predecessors must satisfy t_n - W < t < t_n
    np.testing.assert_allclose(delays(TARGET, SOURCE, 1.0, "max", "relative"), [0.6, 0.3, 0.5, 0.2])
    np.testing.assert_allclose(delays(TARGET, SOURCE, 1.0, "mean", "relative"),
                               [0.6, 0.3, 0.5, 0.2])
    with pytest.raises(ConfigError):
        delays(TARGET, SOURCE, 1.0, "median")


def test_moment_match_hand_example():
    seq = EventSequence.from_unsorted([[0.2, 1.5, 1.8, 2.6]], [[1.0] * 4], 3.0)
    p = moment_match(seq, "truncated_gaussian", 1.0, builtin_mark_model("unmarked"))
    assert p.mu_tilde[0] == pytest.approx(4 / 6)
    assert p.mu[0] == pytest.approx(4 / 12)
    k = p.kernels[0][0]
    assert k.alpha == pytest.approx(4 / 16)
    # delays 0.3 and 0.8
    assert k.m == pytest.approx(0.55)
    assert k.sigma == pytest.approx(np.std([0.3, 0.8], ddof=1))


def test_moment_match_raised_cosine_shape():
    seq = EventSequence.from_unsorted([[0.2, 1.5, 1.8, 2.6]], [[1.0] * 4], 3.0)
    k = moment_match(seq, "raised_cosine", 1.0, builtin_mark_model("unmarked")).kernels[0][0]
    sigma = np.std([0.3, 0.8], ddof=1)
    assert k.u == pytest.approx(0.55 - sigma)
    assert k.s == pytest.approx(sigma)


def test_moment_match_falls_back_without_delays():
    seq = EventSequence.from_unsorted([[0.1, 0.4, 0.7]], [[0.5] * 3], 2.0)
    k = moment_match(seq, "truncated_gaussian", 1.0, builtin_mark_model("identity-linear")).kernels[0][0]
    assert (k.m, k.sigma) == (0.5, 0.25)


@pytest.mark.parametrize("marks", ["identity-linear", "identity-smallmark", "unmarked"])
def test_moment_match_count_identities(marks):
    rng = np.random.default_rng(1)
    mm = builtin_mark_model(marks)
    times = np.sort(rng.uniform(0, 50, 173))
    seq = EventSequence.from_unsorted([times], [mm.sample("f1", rng, 173)], 50.0)
    p = moment_match(seq, "truncated_gaussian", 1.0, mm)
    N, T = 173, 50.0
    assert p.mu_tilde[0] * T == pytest.approx(N / 2, rel=1e-12)
    omega_sum = mm.omega(seq.marks[0]).sum()
    assert p.mu[0] * T + p.kernels[0][0].alpha * omega_sum == pytest.approx(N / 2, rel=1e-12)


def test_moment_match_rejects_bad_input():
    seq = EventSequence.from_unsorted([[0.1]], [[0.5]], 2.0)
    with pytest.raises(ConfigError):
        moment_match(seq, "truncated_gaussian", 1.0, builtin_mark_model("unmarked"), scheme="random")
    with pytest.raises(DataError):
        moment_match(EventSequence([np.array([])], [np.array([])], 1.0), "truncated_gaussian", 1.0,
                     builtin_mark_model("unmarked"))


@pytest.mark.parametrize("family", ["truncated_gaussian", "raised_cosine"])
def test_random_init_is_seeded_and_feasible(family):
    mm = builtin_mark_model("identity-linear")
    a = random_init(family, 1.0, mm, seed=4, D=2)
    b = random_init(family, 1.0, mm, seed=4, D=2)
    c = random_init(family, 1.0, mm, seed=5, D=2)
    np.testing.assert_array_equal(a.to_vector(), b.to_vector())
    assert not np.array_equal(a.to_vector(), c.to_vector())
    assert np.all((a.mu >= 0) & (a.mu < 1)) and np.all((a.mu_tilde >= 0) & (a.mu_tilde < 1))
    for row in a.kernels:
        for k in row:
            assert 0 <= k.alpha < 1
            if family == "raised_cosine":
                assert k.u + 2 * k.s <= 1.0 + 1e-12 and k.s >= SIGMA_MIN
            else:
                assert 0 <= k.m <= 1 and SIGMA_MIN <= k.sigma <= 1


def test_init_config_validation():
    with pytest.raises(ConfigError):
        InitConfig(scheme="zeros")
    with pytest.raises(ConfigError):
        InitConfig(rho_init="ones")
    with pytest.raises(ConfigError):
        InitConfig(deltat_window="sliding")
