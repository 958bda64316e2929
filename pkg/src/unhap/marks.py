"""Mark weight function and mark densities of the noise and structured processes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class PiecewiseLinearDensity:
    """Density given by linear interpolation between knots, zero outside them.

    ``knots`` is a sequence of ``(kappa, density)`` pairs with nondecreasing
    ``kappa``. A repeated abscissa encodes a jump.
    """

    knots: tuple

    def __post_init__(self):
        if len(self.knots) < 2:
            raise ConfigError("a density table needs at least two knots")
        xs = [float(k) for k, _ in self.knots]
        ys = [float(v) for _, v in self.knots]
        if any(b < a for a, b in zip(xs, xs[1:])):
            raise ConfigError("density knots must have nondecreasing abscissae")
        if any(y < 0 for y in ys):
            raise ConfigError("density values must be nonnegative")
        object.__setattr__(self, "knots", tuple(zip(xs, ys)))

    @property
    def xs(self) -> np.ndarray:
        return np.array([k for k, _ in self.knots])

    @property
    def ys(self) -> np.ndarray:
        return np.array([v for _, v in self.knots])

    @property
    def support(self) -> tuple:
        return self.knots[0][0], self.knots[-1][0]

    def __call__(self, kappa):
        kappa = np.asarray(kappa, dtype=float)
        lo, hi = self.support
        out = np.interp(kappa, self.xs, self.ys)
        return np.where((kappa >= lo) & (kappa <= hi), out, 0.0)

    def segments(self):
        for (x0, y0), (x1, y1) in zip(self.knots, self.knots[1:]):
            if x1 > x0:
                yield x0, y0, x1, y1

    def integrate(self, fn) -> float:
        """Integral of ``fn(kappa, density(kappa))`` over the support.

        Gauss-Legendre on each linear piece; exact for polynomial integrands
        of degree < 128.
        """
        total = 0.0
        for x0, y0, x1, y1 in self.segments():
            half = 0.5 * (x1 - x0)
            k = x0 + half * (_GL_NODES + 1.0)
            dens = y0 + (y1 - y0) * (k - x0) / (x1 - x0)
            total += half * float(np.dot(_GL_WEIGHTS, fn(k, dens)))
        return total

    def sample(self, rng, size: int) -> np.ndarray:
        """Inverse-CDF sampling, exact on each linear piece."""
        segs = list(self.segments())
        masses = np.array([(x1 - x0) * (y0 + y1) / 2 for x0, y0, x1, y1 in segs])
        cum = np.concatenate([[0.0], np.cumsum(masses)])
        u = rng.random(size) * cum[-1]
        idx = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(segs) - 1)
        out = np.empty(size)
        for j, (x0, y0, x1, y1) in enumerate(segs):
            sel = idx == j
            if not np.any(sel):
                continue
            r = u[sel] - cum[j]
            h = x1 - x0
            slope = (y1 - y0) / h
            if abs(slope) < 1e-12 * max(y0, y1, 1.0):
                d = r / y0
            else:
                # solve y0 d + slope d^2 / 2 = r for d in [0, h]
                disc = np.maximum(y0 * y0 + 2.0 * slope * r, 0.0)
                d = 2.0 * r / (y0 + np.sqrt(disc))
            out[sel] = np.clip(x0 + d, x0, x1)
        return out


def _identity(kappa):
    return np.asarray(kappa, dtype=float)


def _constant(kappa):
    return np.ones_like(np.asarray(kappa, dtype=float))


OMEGAS = {"identity": _identity, "constant": _constant}


@dataclass(frozen=True)
class MarkModel:
    """Mark weight ``omega`` and the densities ``f1`` (structured) and ``f0`` (noise).

    With ``unmarked=True`` every mark is the point mass at 1: ``omega``, ``f0``
    and ``f1`` all evaluate to one at events and both squared-density
    integrals are one, so mark-weighted sums reduce to event counts.
    """

    name: str
    f1: PiecewiseLinearDensity | None
    f0: PiecewiseLinearDensity | None
    omega_name: str = "identity"
    unmarked: bool = False
    H1: float = field(init=False)
    H0: float = field(init=False)

    def __post_init__(self):
        if self.omega_name not in OMEGAS:
            raise ConfigError(f"unknown omega {self.omega_name!r}; expected one of {sorted(OMEGAS)}")
        if self.unmarked:
            object.__setattr__(self, "H1", 1.0)
            object.__setattr__(self, "H0", 1.0)
            return
        for label, dens in (("f1", self.f1), ("f0", self.f0)):
            mass = dens.integrate(lambda k, d: d)
            if abs(mass - 1.0) > 1e-6:
                raise ConfigError(f"mark density {label} integrates to {mass}, not 1")
        object.__setattr__(self, "H1", self.f1.integrate(lambda k, d: d * d))
        object.__setattr__(self, "H0", self.f0.integrate(lambda k, d: d * d))

    @property
    def support(self) -> tuple:
        if self.unmarked:
            return 1.0, 1.0
        lo0, hi0 = self.f0.support
        lo1, hi1 = self.f1.support
        return min(lo0, lo1), max(hi0, hi1)

    def omega(self, kappa):
        if self.unmarked:
            return _constant(kappa)
        return OMEGAS[self.omega_name](kappa)

    def density(self, which: str, kappa):
        if self.unmarked:
            return _constant(kappa)
        return {"f1": self.f1, "f0": self.f0}[which](kappa)

    def expected_omega(self, under: str = "f1") -> float:
        if under not in ("f0", "f1"):
            raise ConfigError(f"expected_omega: under must be 'f0' or 'f1', got {under!r}")
        if self.unmarked:
            return 1.0
        dens = self.f1 if under == "f1" else self.f0
        omega = OMEGAS[self.omega_name]
        return dens.integrate(lambda k, d: omega(k) * d)

    def sample(self, which: str, rng, size: int) -> np.ndarray:
        if self.unmarked:
            return np.ones(size)
        return {"f1": self.f1, "f0": self.f0}[which].sample(rng, size)

    def as_dict(self) -> dict:
        if self.name in BUILTIN_MARK_MODELS:
            return {"name": self.name}
        return {
            "name": self.name,
            "omega": self.omega_name,
            "f1": [list(k) for k in self.f1.knots],
            "f0": [list(k) for k in self.f0.knots],
        }


_LINEAR_UP = ((0.0, 0.0), (1.0, 2.0))
_LINEAR_DOWN = ((0.0, 2.0), (1.0, 0.0))
_UNIFORM = ((0.0, 1.0), (1.0, 1.0))
_SMALL = ((0.0, 5.0), (0.2, 5.0))

BUILTIN_MARK_MODELS = {
    "identity-linear": lambda: MarkModel("identity-linear", PiecewiseLinearDensity(_LINEAR_UP),
                                         PiecewiseLinearDensity(_LINEAR_DOWN)),
    "identity-uniform": lambda: MarkModel("identity-uniform", PiecewiseLinearDensity(_LINEAR_UP),
                                          PiecewiseLinearDensity(_UNIFORM)),
    "identity-smallmark": lambda: MarkModel("identity-smallmark", PiecewiseLinearDensity(_LINEAR_UP),
                                            PiecewiseLinearDensity(_SMALL)),
    "unmarked": lambda: MarkModel("unmarked", None, None, omega_name="constant", unmarked=True),
}


def builtin_mark_model(name: str) -> MarkModel:
    try:
        return BUILTIN_MARK_MODELS[name]()
    except KeyError:
        raise ConfigError(f"unknown mark model {name!r}; "
                          f"expected one of {sorted(BUILTIN_MARK_MODELS)}") from None


def mark_model_from_dict(data: dict) -> MarkModel:
    """Build a mark model from ``{"name": ...}`` or a custom density table."""
    data = dict(data)
    name = data.pop("name", "custom")
    if not data:
        return builtin_mark_model(name)
    unknown = set(data) - {"omega", "f0", "f1"}
    if unknown:
        raise ConfigError(f"unknown mark_model keys: {sorted(unknown)}")
    if "f0" not in data or "f1" not in data:
        raise ConfigError("a custom mark model needs both f0 and f1 knot tables")
    return MarkModel(
        name=name,
        f1=PiecewiseLinearDensity(tuple(tuple(k) for k in data["f1"])),
        f0=PiecewiseLinearDensity(tuple(tuple(k) for k in data["f0"])),
        omega_name=data.get("omega", "identity"),
    )
