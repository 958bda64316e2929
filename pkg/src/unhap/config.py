"""Strictly parsed TOML run configuration.

Sections: top-level ``seed``; ``[simulation]`` (with a ``[simulation.kernel]``
table); ``[model]``; ``[solver]`` (with ``[solver.init]``); ``[metrics]``.
Unknown keys are rejected. Missing keys take the defaults below.
"""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .init import InitConfig
from .io import canonical_json, sha256_text
from .kernel import KERNEL_FAMILIES, kernel_class, make_kernel
from .marks import builtin_mark_model, mark_model_from_dict
from .simulator import SimConfig
from .solver import SolverConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

NLL_POLICIES = ("auto", "mixture", "hawkes-only")
DEFAULT_SHAPES = {"truncated_gaussian": {"m": 0.5, "sigma": 0.1},
                  "raised_cosine": {"u": 0.4, "s": 0.1}}


def _default_kernel() -> dict:
    return {"family": "truncated_gaussian", "m": 0.5, "sigma": 0.1, "W": 1.0}


@dataclass(frozen=True)
class SimulationSection:
    mu: float = 0.8
    alpha: float = 1.45
    mu_tilde: float = 0.5
    T: float = 1000.0
    marks: object = "identity-linear"
    kernel: dict = field(default_factory=_default_kernel)
    test_T: float = 0.0         # > 0 also writes a held-out test sequence


@dataclass(frozen=True)
class ModelSection:
    marks: object = None        # defaults to the simulation marks


@dataclass(frozen=True)
class MetricsSection:
    nll_policy: str = "auto"    # auto: mixture for unhap, hawkes-only for baselines
    param_coords: tuple = ()    # empty: mu and every kernel parameter


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    simulation: SimulationSection = field(default_factory=SimulationSection)
    model: ModelSection = field(default_factory=ModelSection)
    solver: SolverConfig = field(default_factory=SolverConfig)
    metrics: MetricsSection = field(default_factory=MetricsSection)
    init_seed_explicit: bool = field(default=False, compare=False)   # else it follows ``seed``

    def resolved(self) -> dict:
        """Plain-data view with every default filled in."""
        out = asdict(self)
        out.pop("init_seed_explicit")
        out["model"]["marks"] = self.model_marks_spec
        out["metrics"]["param_coords"] = list(self.metrics.param_coords)
        return out

    def config_hash(self) -> str:
        return sha256_text(canonical_json(self.resolved()))

    @property
    def model_marks_spec(self):
        return self.model.marks if self.model.marks is not None else self.simulation.marks

    def mark_model(self, which: str = "model"):
        spec = self.model_marks_spec if which == "model" else self.simulation.marks
        return resolve_marks(spec)

    def sim_config(self, seed: int | None = None, T: float | None = None) -> SimConfig:
        sim = self.simulation
        kernel = dict(sim.kernel)
        family = kernel.pop("family", "truncated_gaussian")
        try:
            shape = make_kernel(family, alpha=1.0, **kernel)
        except TypeError as exc:
            raise ConfigError(f"simulation.kernel: {exc}") from None
        return SimConfig(mu=sim.mu, alpha=sim.alpha, kernel=shape,
                         mark_model=self.mark_model("simulation"), mu_tilde=sim.mu_tilde,
                         T=sim.T if T is None else T, seed=self.seed if seed is None else seed)

    def with_seed(self, seed: int) -> "RunConfig":
        solver = replace(self.solver, seed=seed)
        if not self.init_seed_explicit:
            solver = replace(solver, init=replace(solver.init, seed=seed))
        return replace(self, seed=seed, solver=solver)


def resolve_marks(spec):
    if isinstance(spec, str):
        return builtin_mark_model(spec)
    if isinstance(spec, dict):
        return mark_model_from_dict(spec)
    raise ConfigError(f"marks must be a builtin name or a table, got {spec!r}")


def _check_keys(section: str, data: dict, allowed) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        where = f"[{section}]" if section else "top level"
        raise ConfigError(f"unknown key(s) at {where}: {', '.join(unknown)}")


def _build(cls, section: str, data: dict, nested=None):
    nested = nested or {}
    names = [f.name for f in fields(cls)]
    _check_keys(section, data, names)
    kwargs = {}
    for key, value in data.items():
        if key in nested:
            kwargs[key] = nested[key](value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def _kernel_table(value) -> dict:
    if not isinstance(value, dict):
        raise ConfigError("[simulation.kernel] must be a table")
    family = value.get("family", "truncated_gaussian")
    cls = kernel_class(family)
    allowed = {"family", "W", *cls.param_names} - {"alpha"}
    _check_keys("simulation.kernel", value, allowed)
    out = {"family": cls.family, "W": 1.0, **DEFAULT_SHAPES[cls.family]}
    out.update({k: v for k, v in value.items() if k != "family"})
    return out


def config_from_dict(data: dict) -> RunConfig:
    _check_keys("", data, ("seed", "simulation", "model", "solver", "metrics"))
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    sim = _build(SimulationSection, "simulation", data.get("simulation", {}),
                 {"kernel": _kernel_table})
    model = _build(ModelSection, "model", data.get("model", {}))
    solver_data = dict(data.get("solver", {}))
    init_data = solver_data.pop("init", {})
    init = _build(InitConfig, "solver.init", init_data)
    if "kernel_family" in solver_data and solver_data["kernel_family"] not in KERNEL_FAMILIES:
        solver_data["kernel_family"] = kernel_class(solver_data["kernel_family"]).family
    solver = _build(SolverConfig, "solver", {**solver_data, "init": init},
                    {"init": lambda v: v})
    metrics_data = dict(data.get("metrics", {}))
    if "param_coords" in metrics_data:
        metrics_data["param_coords"] = tuple(metrics_data["param_coords"])
    metrics = _build(MetricsSection, "metrics", metrics_data)
    if metrics.nll_policy not in NLL_POLICIES:
        raise ConfigError(f"metrics.nll_policy must be one of {NLL_POLICIES}")
    cfg = RunConfig(seed=0, simulation=sim, model=model, solver=solver, metrics=metrics,
                    init_seed_explicit="seed" in init_data)
    resolve_marks(cfg.model_marks_spec)
    return cfg.with_seed(seed)


def load_config(path) -> RunConfig:
    if path is None:
        return config_from_dict({})
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)
