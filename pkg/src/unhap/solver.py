"""Classification-EM solver alternating mixture-weight and parameter updates.

Each block runs an E-step (projected gradient on ``rho`` against the
mean-field loss), a C-step (``Y = rho > 1/2``), one refresh of the
precomputed statistics for ``Y`` and then ``b`` parameter updates against
the hard-label loss, warm-started from the previous block.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError, DivergenceError
from .estimator import (MixtureAssignment, ModelParams, grad_rho, loss_meanfield,
                        objective, precompute)
from .events import EventSequence
from .grid import DiscretizedSequence, discretize_events
from .init import InitConfig, moment_match, random_init
from .kernel import grid_size
from .marks import MarkModel, builtin_mark_model

log = logging.getLogger(__name__)

MODES = ("unhap", "jointfadin", "fadin-unmarked")
MAX_HALVINGS = 5
LM_DAMPING_INIT = 1e-2
LM_DAMPING_MIN = 1e-9
LM_DAMPING_MAX = 1e12


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    With ``precondition`` the parameter updates are Levenberg-Marquardt
    steps on the Gauss-Newton matrix of the loss, scaled by ``step_theta``;
    otherwise ``step_theta`` multiplies the raw gradient.
    """

    n_iter: int = 10000
    b: int = 200
    step_theta: float = 1.0
    step_rho: float = 0.1
    delta: float = 0.01
    W: float = 1.0
    kernel_family: str = "truncated_gaussian"
    mode: str = "unhap"
    init: InitConfig = field(default_factory=InitConfig)
    e_inner_steps: int = 1
    precondition: bool = True
    debug: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown solver mode {self.mode!r}; expected one of {MODES}")
        if not 1 <= self.b <= self.n_iter:
            raise ConfigError(f"need 1 <= b <= n_iter, got b={self.b}, n_iter={self.n_iter}")
        if not 0 < self.delta <= self.W:
            raise ConfigError(f"need 0 < delta <= W, got delta={self.delta}, W={self.W}")
        if self.step_theta <= 0 or self.step_rho <= 0:
            raise ConfigError("step sizes must be positive")
        if self.e_inner_steps < 1:
            raise ConfigError("e_inner_steps must be >= 1")


@dataclass
class FitResult:
    params: ModelParams
    rho: MixtureAssignment
    dseq: DiscretizedSequence
    loss_trace: np.ndarray
    config: SolverConfig
    n_refresh: int
    n_halvings: int = 0
    n_rejected: int = 0
    descent_fraction: float = 1.0
    warnings: list = field(default_factory=list)
    timing: dict = field(default_factory=dict, compare=False)

    def event_rho(self) -> list:
        """Mixture weight of every original event (merged events share theirs)."""
        return [r[g.event_to_pseudo] for r, g in zip(self.rho.rho, self.dseq.types)]


def predict_labels(result: FitResult) -> list:
    """Hard labels per original event: 1 iff ``rho > 1/2``."""
    return [(r > 0.5).astype(int) for r in result.event_rho()]


def initial_params(seq: EventSequence, mark_model: MarkModel, cfg: SolverConfig) -> ModelParams:
    if cfg.init.scheme == "random":
        return random_init(cfg.kernel_family, cfg.W, mark_model, seed=cfg.init.seed, D=seq.D)
    return moment_match(seq, cfg.kernel_family, cfg.W, mark_model, cfg.init.scheme,
                        cfg.init.deltat_window)


def _initial_rho(dseq: DiscretizedSequence, cfg: SolverConfig) -> MixtureAssignment:
    if cfg.mode != "unhap":
        return MixtureAssignment.constant(dseq, 1.0)
    if cfg.init.rho_init == "bernoulli":
        rng = np.random.default_rng(cfg.init.seed)
        return MixtureAssignment([rng.integers(0, 2, n).astype(float) for n in dseq.n_pseudo])
    return MixtureAssignment.constant(dseq, 0.5)


class _ThetaStepper:
    """Parameter updates against fixed precomputations.

    With ``precondition`` each call is one Levenberg-Marquardt iteration: a
    damped Gauss-Newton step that is only accepted if it does not increase
    the loss. The damping restarts whenever the precomputations change.
    Otherwise it is a projected gradient step whose size is halved whenever
    the loss turns non-finite.
    """

    def __init__(self, cfg: SolverConfig, dseq: DiscretizedSequence, with_noise: bool):
        self.cfg = cfg
        self.dseq = dseq
        self.with_noise = with_noise
        self.step = cfg.step_theta
        self.halvings = 0
        self.rejected = 0
        self.damping = LM_DAMPING_INIT
        self.last = None
        self._cache = None

    def __call__(self, params: ModelParams, pre):
        """One update from ``params``; returns the new iterate and the loss at ``params``."""
        if self.cfg.precondition:
            return self._levenberg_marquardt(params, pre)
        return self._gradient(params, pre)

    def _evaluate(self, params, pre, curvature):
        return objective(params, pre, self.dseq, self.with_noise, curvature=curvature)

    def _levenberg_marquardt(self, params, pre):
        cache = self._cache
        if cache is not None and cache[0] is params and cache[1] is pre:
            loss, grad, H = cache[2:]
        else:
            if cache is None or cache[1] is not pre:
                self.damping = LM_DAMPING_INIT
            loss, grad, H = self._evaluate(params, pre, True)
            if not np.isfinite(loss):
                raise DivergenceError("non-finite loss at the current parameters")
        vec = params.to_vector()
        g = grad.to_vector()
        A = H + np.diag(self.damping * np.diag(H) + 1e-9 * self.dseq.T)
        try:
            d = np.linalg.solve(A, g)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(A, g, rcond=None)[0]
        trial = self._move(params, vec, self.step * d)
        t_loss, t_grad, t_H = self._evaluate(trial, pre, True)
        if np.isfinite(t_loss) and t_loss <= loss:
            self.damping = max(self.damping / 3, LM_DAMPING_MIN)
            self._cache = (trial, pre, t_loss, t_grad, t_H)
            return trial, loss
        # rejected: stay put and damp harder on the next call
        self.rejected += 1
        self.damping = min(self.damping * 4, LM_DAMPING_MAX)
        self._cache = (params, pre, loss, grad, H)
        return params, loss

    def _gradient(self, params, pre):
        loss, grad = self._evaluate(params, pre, False)
        while not (np.isfinite(loss) and np.all(np.isfinite(grad.to_vector()))):
            if self.last is None:
                raise DivergenceError("non-finite loss at the initial parameters")
            self.halvings += 1
            if self.halvings > MAX_HALVINGS:
                raise DivergenceError(f"non-finite loss after {MAX_HALVINGS} step halvings")
            self.step /= 2
            log.warning("non-finite loss; restoring previous iterate, step -> %g", self.step)
            prev, vec, g = self.last
            params = self._move(prev, vec, self.step * g)
            loss, grad = self._evaluate(params, pre, False)
        vec = params.to_vector()
        g = grad.to_vector()
        self.last = (params, vec, g)
        return self._move(params, vec, self.step * g), loss

    def _move(self, params, vec, d):
        new = params.from_vector(vec - d)
        if not self.with_noise:
            new = replace(new, mu_tilde=np.zeros_like(new.mu_tilde))
        return new


def fit(seq: EventSequence, mark_model: MarkModel, cfg: SolverConfig) -> FitResult:
    """Estimate parameters and mixture weights from one event sequence."""
    if seq.n_events() == 0:
        raise DataError("no events")
    if cfg.mode == "fadin-unmarked":
        mark_model = builtin_mark_model("unmarked")
    timing = {"init": 0.0, "precompute": 0.0, "e_step": 0.0, "m_step": 0.0}
    t0 = time.perf_counter()
    dseq = discretize_events(seq, cfg.delta, mark_model)
    L = grid_size(cfg.W, cfg.delta)
    params = initial_params(seq, mark_model, cfg)
    with_noise = cfg.mode == "unhap"
    if not with_noise:
        params = replace(params, mu_tilde=np.zeros(params.D))
    rho = _initial_rho(dseq, cfg)
    timing["init"] = time.perf_counter() - t0
    warnings = []
    if dseq.n_merged:
        warnings.append(f"{dseq.n_merged} event(s) merged on shared grid nodes")

    stepper = _ThetaStepper(cfg, dseq, with_noise)
    trace = np.empty(cfg.n_iter)
    n_blocks = cfg.n_iter // cfg.b
    n_refresh = 0
    non_increasing = 0
    comparisons = 0
    it = 0
    pre = None
    for block in range(n_blocks):
        steps = cfg.b if block < n_blocks - 1 else cfg.n_iter - cfg.b * (n_blocks - 1)
        if cfg.mode == "unhap":
            t1 = time.perf_counter()
            for _ in range(cfg.e_inner_steps):
                g = grad_rho(params, rho, dseq)
                rho = MixtureAssignment([r - cfg.step_rho * gi for r, gi in zip(rho.rho, g)])
            timing["e_step"] += time.perf_counter() - t1
        if pre is None or cfg.mode == "unhap":
            t1 = time.perf_counter()
            pre = precompute(dseq, rho.binarized(), L)
            n_refresh += 1
            timing["precompute"] += time.perf_counter() - t1
        t1 = time.perf_counter()
        prev = None
        for _ in range(steps):
            params, loss = stepper(params, pre)
            trace[it] = loss
            if prev is not None:
                comparisons += 1
                non_increasing += loss <= prev + 1e-10 * max(abs(prev), 1.0)
            prev = loss
            it += 1
        timing["m_step"] += time.perf_counter() - t1
        if not np.all(np.isfinite(trace[:it])):
            raise DivergenceError("loss became non-finite")
    if cfg.debug and cfg.mode == "unhap":
        log.debug("final mean-field loss %.6g", loss_meanfield(params, rho, dseq))
    descent = non_increasing / comparisons if comparisons else 1.0
    log.info("fit done: mode=%s refreshes=%d descent=%.4f", cfg.mode, n_refresh, descent)
    return FitResult(params=params, rho=rho, dseq=dseq, loss_trace=trace, config=cfg,
                     n_refresh=n_refresh, n_halvings=stepper.halvings,
                     n_rejected=stepper.rejected, descent_fraction=descent,
                     warnings=warnings, timing=timing)
