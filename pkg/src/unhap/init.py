"""Initial parameter values: moment matching and uniform random draws."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .estimator import ModelParams
from .events import EventSequence
from .kernel import SIGMA_MIN, kernel_class
from .marks import MarkModel

log = logging.getLogger(__name__)

SCHEMES = ("moments-max", "moments-mean", "random")
WINDOWS = ("absolute", "relative")
RHO_INITS = ("half", "bernoulli")


@dataclass(frozen=True)
class InitConfig:
    scheme: str = "moments-max"
    seed: int = 0
    rho_init: str = "half"
    deltat_window: str = "absolute"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown init scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.rho_init not in RHO_INITS:
            raise ConfigError(f"unknown rho_init {self.rho_init!r}; expected one of {RHO_INITS}")
        if self.deltat_window not in WINDOWS:
            raise ConfigError(f"unknown deltat_window {self.deltat_window!r}; expected one of {WINDOWS}")


def delays(t_target, t_source, W: float, rule: str = "max", window: str = "absolute") -> np.ndarray:
    """Delay between each target event and its admissible predecessors.

    Predecessors are source events ``t`` with ``W < t < t_n`` (``absolute``)
    or ``t_n - W < t < t_n`` (``relative``). ``rule="max"`` uses the latest
    predecessor, ``rule="mean"`` their mean time. Targets without predecessors
    are dropped.
    """
    t_target = np.asarray(t_target, dtype=float)
    t_source = np.sort(np.asarray(t_source, dtype=float))
    low = W if window == "absolute" else t_target - W
    lo = np.searchsorted(t_source, low, side="right")
    lo = np.broadcast_to(lo, t_target.shape)
    hi = np.searchsorted(t_source, t_target, side="left")
    ok = hi > lo
    if rule == "max":
        ref = t_source[hi[ok] - 1]
    elif rule == "mean":
        csum = np.concatenate([[0.0], np.cumsum(t_source)])
        ref = (csum[hi[ok]] - csum[lo[ok]]) / (hi[ok] - lo[ok])
    else:
        raise ConfigError(f"unknown delay rule {rule!r}")
    return t_target[ok] - ref


def _shape_from_delays(dt: np.ndarray, W: float) -> tuple:
    if len(dt) < 2:
        log.warning("moment matching: %d usable delay(s); falling back to m=W/2, sigma=W/4", len(dt))
        return W / 2, W / 4
    m = float(np.mean(dt))
    sigma = float(np.std(dt, ddof=1))
    return m, sigma


def moment_match(seq: EventSequence, kernel_family: str, W: float, mark_model: MarkModel,
                 scheme: str = "moments-max", deltat_window: str = "absolute") -> ModelParams:
    """Baselines, amplitudes and kernel shapes matching the observed counts and delays."""
    if scheme not in ("moments-max", "moments-mean"):
        raise ConfigError(f"moment_match needs a moments scheme, got {scheme!r}")
    if seq.n_events() == 0:
        raise DataError("moment matching needs at least one event")
    rule = "max" if scheme == "moments-max" else "mean"
    D, T = seq.D, seq.T
    cls = kernel_class(kernel_family)
    counts = np.array([seq.n_events(i) for i in range(D)], dtype=float)
    omega_sums = np.array([float(np.sum(mark_model.omega(seq.marks[j]))) for j in range(D)])
    mu_tilde = counts / (2 * T)
    mu = counts / (2 * T * (D + 1))
    kernels = []
    for i in range(D):
        row = []
        for j in range(D):
            alpha = counts[i] / (2 * (D + 1) * omega_sums[j]) if omega_sums[j] > 0 else 0.0
            dt = delays(seq.times[i], seq.times[j], W, rule, deltat_window)
            m, sigma = _shape_from_delays(dt, W)
            if cls.family == "raised_cosine":
                row.append(cls.project(alpha, max(0.0, m - sigma), sigma, W))
            else:
                row.append(cls.project(alpha, m, sigma, W))
        kernels.append(tuple(row))
    return ModelParams(mu, mu_tilde, tuple(kernels), mark_model)


def random_init(kernel_family: str, W: float, mark_model: MarkModel, seed: int = 0,
                D: int = 1, bounds: dict | None = None) -> ModelParams:
    """Uniform draws: baselines and amplitude in ``[0, 1)``, shapes in their feasible box."""
    bounds = {"mu": (0.0, 1.0), "mu_tilde": (0.0, 1.0), "alpha": (0.0, 1.0), **(bounds or {})}
    rng = np.random.default_rng(seed)
    cls = kernel_class(kernel_family)
    mu = rng.uniform(*bounds["mu"], size=D)
    mu_tilde = rng.uniform(*bounds["mu_tilde"], size=D)
    kernels = []
    for _ in range(D):
        row = []
        for _ in range(D):
            alpha = rng.uniform(*bounds["alpha"])
            if cls.family == "raised_cosine":
                u = rng.uniform(0.0, W - 2 * SIGMA_MIN)
                s = rng.uniform(SIGMA_MIN, (W - u) / 2)
                row.append(cls(alpha=alpha, u=u, s=s, W=W))
            else:
                m = rng.uniform(0.0, W)
                sigma = rng.uniform(SIGMA_MIN, W)
                row.append(cls(alpha=alpha, m=m, sigma=sigma, W=W))
        kernels.append(tuple(row))
    return ModelParams(mu, mu_tilde, tuple(kernels), mark_model)
