"""Finite-support parametric excitation kernels.

Each kernel is an immutable value holding an amplitude ``alpha`` and shape
parameters. Kernels evaluate to zero outside their support, can be sampled on
a regular grid of step ``delta`` and expose analytic derivatives with respect
to every parameter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError

SIGMA_MIN = 1e-3
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def grid_size(W: float, delta: float) -> int:
    """Number of kernel lags ``floor(W / delta)``, robust to float round-off."""
    return int(math.floor(W / delta + 1e-9))


def _std_normal_pdf(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


@dataclass(frozen=True)
class DiscreteKernel:
    """Kernel sampled at lags ``tau * delta`` for ``tau = 0..L``.

    ``values[0]`` is stored for completeness; the losses only sum over
    ``tau = 1..L``.
    """

    values: np.ndarray
    delta: float
    grads: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return len(self.values) - 1

    @property
    def lags(self) -> np.ndarray:
        return self.values[1:]


class _KernelBase:
    family: str = ""
    param_names: tuple = ()

    def params(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in self.param_names], dtype=float)

    def as_dict(self) -> dict:
        out = {"family": self.family, "W": self.W}
        out.update({name: getattr(self, name) for name in self.param_names})
        return out

    def _check_delta(self, delta: float) -> None:
        if not delta > 0 or delta > self.W * (1 + 1e-12):
            raise ConfigError(f"kernel step delta={delta} must satisfy 0 < delta <= W={self.W}")

    def discretize(self, delta: float) -> DiscreteKernel:
        self._check_delta(delta)
        lags = np.arange(grid_size(self.W, delta) + 1) * delta
        return DiscreteKernel(self.evaluate(lags), delta, self.grad(lags))

    def param_grad(self, delta: float) -> dict:
        self._check_delta(delta)
        lags = np.arange(grid_size(self.W, delta) + 1) * delta
        return self.grad(lags)

    def evaluate(self, t):
        raise NotImplementedError

    def grad(self, t) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class TruncGaussKernel(_KernelBase):
    """``alpha`` times a Gaussian density of mean ``m`` and std ``sigma``
    truncated and renormalised on ``[0, W]``."""

    alpha: float
    m: float
    sigma: float
    W: float = 1.0

    family = "truncated_gaussian"
    param_names = ("alpha", "m", "sigma")

    def __post_init__(self):
        if not self.W > 0:
            raise ConfigError(f"support length W must be > 0, got {self.W}")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")
        if not self.alpha >= 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")

    def _normaliser(self):
        a = -self.m / self.sigma
        b = (self.W - self.m) / self.sigma
        return a, b, ndtr(b) - ndtr(a)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        _, _, Z = self._normaliser()
        x = (t - self.m) / self.sigma
        out = self.alpha * _std_normal_pdf(x) / (self.sigma * Z)
        return np.where((t >= 0) & (t <= self.W), out, 0.0)

    def grad(self, t) -> dict:
        t = np.asarray(t, dtype=float)
        s = self.sigma
        a, b, Z = self._normaliser()
        ga, gb = _std_normal_pdf(a), _std_normal_pdf(b)
        x = (t - self.m) / s
        inside = (t >= 0) & (t <= self.W)
        shape = np.where(inside, _std_normal_pdf(x) / (s * Z), 0.0)
        # d log Z / dm and d log Z / dsigma
        dlogz_m = (ga - gb) / (s * Z)
        dlogz_s = (a * ga - b * gb) / (s * Z)
        phi = self.alpha * shape
        return {
            "alpha": shape,
            "m": phi * (x / s - dlogz_m),
            "sigma": phi * ((x * x - 1.0) / s - dlogz_s),
        }

    def integral(self) -> float:
        return float(self.alpha)

    @classmethod
    def project(cls, alpha, m, sigma, W):
        return cls(
            alpha=max(alpha, 0.0),
            m=min(max(m, 0.0), W),
            sigma=min(max(sigma, SIGMA_MIN), W),
            W=W,
        )

    def with_params(self, values):
        """New kernel with ``values`` projected on the feasible box."""
        alpha, m, sigma = (float(v) for v in values)
        return self.project(alpha, m, sigma, self.W)


@dataclass(frozen=True)
class RaisedCosineKernel(_KernelBase):
    """``alpha * (1 + cos((t - u) / s * pi - pi))`` on ``[u, u + 2 s]``."""

    alpha: float
    u: float
    s: float
    W: float = 1.0

    family = "raised_cosine"
    param_names = ("alpha", "u", "s")

    def __post_init__(self):
        if not self.W > 0:
            raise ConfigError(f"support length W must be > 0, got {self.W}")
        if not self.s > 0:
            raise ConfigError(f"half-width s must be > 0, got {self.s}")
        if not self.u >= 0:
            raise ConfigError(f"onset u must be >= 0, got {self.u}")
        if not self.alpha >= 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.u + 2 * self.s > self.W * (1 + 1e-12):
            raise ConfigError(f"raised cosine support u + 2s = {self.u + 2 * self.s} exceeds W={self.W}")

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= self.u) & (t <= self.u + 2 * self.s)
        x = (t - self.u) / self.s * math.pi - math.pi
        return np.where(inside, self.alpha * (1.0 + np.cos(x)), 0.0)

    def grad(self, t) -> dict:
        t = np.asarray(t, dtype=float)
        inside = (t >= self.u) & (t <= self.u + 2 * self.s)
        x = (t - self.u) / self.s * math.pi - math.pi
        sin_x = np.sin(x)
        return {
            "alpha": np.where(inside, 1.0 + np.cos(x), 0.0),
            "u": np.where(inside, self.alpha * sin_x * math.pi / self.s, 0.0),
            "s": np.where(inside, self.alpha * sin_x * (t - self.u) * math.pi / self.s**2, 0.0),
        }

    def integral(self) -> float:
        return float(2.0 * self.alpha * self.s)

    @classmethod
    def project(cls, alpha, u, s, W):
        u = min(max(u, 0.0), W - 2 * SIGMA_MIN)
        s = min(max(s, SIGMA_MIN), (W - u) / 2)
        return cls(alpha=max(alpha, 0.0), u=u, s=s, W=W)

    def with_params(self, values):
        alpha, u, s = (float(v) for v in values)
        return self.project(alpha, u, s, self.W)


KERNEL_FAMILIES = {
    TruncGaussKernel.family: TruncGaussKernel,
    RaisedCosineKernel.family: RaisedCosineKernel,
}
_ALIASES = {"truncgauss": "truncated_gaussian", "trunc_gauss": "truncated_gaussian",
            "gaussian": "truncated_gaussian", "raisedcosine": "raised_cosine",
            "cosine": "raised_cosine"}


def kernel_class(family: str):
    key = _ALIASES.get(family.lower().replace("-", "_"), family.lower().replace("-", "_"))
    try:
        return KERNEL_FAMILIES[key]
    except KeyError:
        raise ConfigError(f"unknown kernel family {family!r}; "
                          f"expected one of {sorted(KERNEL_FAMILIES)}") from None


def make_kernel(family: str, W: float = 1.0, **params):
    return kernel_class(family)(W=W, **params)


def kernel_from_dict(data: dict):
    data = dict(data)
    family = data.pop("family")
    return make_kernel(family, **data)
