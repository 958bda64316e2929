"""Simulation of the noisy marked Hawkes mixture.

The structured part is drawn with the immigration-birth (cluster)
representation: Poisson immigrants of rate ``mu`` with marks from ``f1``,
each event of mark ``kappa`` spawning children on ``(t, t + W]`` with rate
``alpha * omega(kappa) * phi(. - t)``. Independent homogeneous Poisson noise
of rate ``mu_tilde`` with marks from ``f0`` is superposed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError
from .events import EventSequence, MarkedEvent
from .marks import MarkModel

BOUND_SAFETY = 1.001
_BOUND_GRID = 2000


def thinning_bound(kernel) -> float:
    """Upper bound of the kernel used for thinning: discrete max times 1.001."""
    return BOUND_SAFETY * float(np.max(kernel.discretize(kernel.W / _BOUND_GRID).values))


@dataclass(frozen=True)
class SimConfig:
    mu: float
    alpha: float
    kernel: object
    mark_model: MarkModel
    mu_tilde: float
    T: float
    seed: int = 0
    shape: object = field(init=False, repr=False)

    def __post_init__(self):
        if self.mu < 0 or self.mu_tilde < 0:
            raise ConfigError(f"baselines must be >= 0 (mu={self.mu}, mu_tilde={self.mu_tilde})")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not self.T > 0:
            raise ConfigError(f"T must be > 0, got {self.T}")
        object.__setattr__(self, "shape", replace(self.kernel, alpha=1.0))
        ratio = self.branching_ratio
        if ratio >= 1:
            raise ConfigError(
                f"unstable configuration: branching ratio alpha * int(phi) * E_f1[omega] = {ratio:.4f} >= 1")

    @property
    def branching_ratio(self) -> float:
        return self.alpha * self.shape.integral() * self.mark_model.expected_omega("f1")

    @property
    def omega_integral(self) -> float:
        """Integral of omega over the mark support, reported alongside the branching ratio."""
        mm = self.mark_model
        if mm.unmarked:
            return 1.0
        lo, hi = mm.support
        return float(quad(lambda k: float(mm.omega(k)), lo, hi)[0])

    @property
    def true_kernel(self):
        return replace(self.kernel, alpha=self.alpha)


def simulate_child_times(parent: MarkedEvent, rate_scale: float, kernel, rng, bound=None) -> np.ndarray:
    """Offspring times of ``parent`` by thinning on ``(t, t + W]``.

    ``kernel`` is the excitation shape; ``rate_scale`` multiplies it
    (``alpha * omega(kappa)``).
    """
    if rate_scale <= 0:
        return np.empty(0)
    if bound is None:
        bound = thinning_bound(kernel)
    W = kernel.W
    n_cand = rng.poisson(rate_scale * bound * W)
    if n_cand == 0:
        return np.empty(0)
    lags = W * (1.0 - rng.random(n_cand))
    keep = rng.random(n_cand) * bound < kernel.evaluate(lags)
    return np.sort(parent.t + lags[keep])


def _spawn(parents_t, parents_w, alpha, shape, bound, rng):
    """Vectorised thinning for a whole generation; returns child times."""
    W = shape.W
    rates = alpha * parents_w * bound * W
    counts = rng.poisson(rates)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0)
    origin = np.repeat(parents_t, counts)
    lags = W * (1.0 - rng.random(total))
    keep = rng.random(total) * bound < shape.evaluate(lags)
    return origin[keep] + lags[keep]


def simulate_mixture(cfg: SimConfig) -> EventSequence:
    """One labelled realisation of the mixture on ``[0, T]`` (single type)."""
    rng = np.random.default_rng(cfg.seed)
    mm = cfg.mark_model
    bound = thinning_bound(cfg.shape)

    n_imm = rng.poisson(cfg.mu * cfg.T)
    gen_t = rng.random(n_imm) * cfg.T
    gen_k = mm.sample("f1", rng, n_imm)
    times, marks, gens = [gen_t], [gen_k], [np.zeros(n_imm, dtype=int)]
    depth = 0
    while len(gen_t) and cfg.alpha > 0:
        child_t = _spawn(gen_t, mm.omega(gen_k), cfg.alpha, cfg.shape, bound, rng)
        child_t = child_t[child_t <= cfg.T]
        depth += 1
        gen_t = child_t
        gen_k = mm.sample("f1", rng, len(child_t))
        times.append(gen_t)
        marks.append(gen_k)
        gens.append(np.full(len(gen_t), depth, dtype=int))

    hawkes_t = np.concatenate(times)
    hawkes_k = np.concatenate(marks)
    hawkes_g = np.concatenate(gens)

    n_noise = rng.poisson(cfg.mu_tilde * cfg.T)
    noise_t = rng.random(n_noise) * cfg.T
    noise_k = mm.sample("f0", rng, n_noise)

    t = np.concatenate([hawkes_t, noise_t])
    k = np.concatenate([hawkes_k, noise_k])
    lab = np.concatenate([np.ones(len(hawkes_t), dtype=int), np.zeros(n_noise, dtype=int)])
    gen = np.concatenate([hawkes_g, np.full(n_noise, -1, dtype=int)])
    return EventSequence.from_unsorted([t], [k], cfg.T, [lab], [gen])
