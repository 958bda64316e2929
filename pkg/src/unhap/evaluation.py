"""Metrics and brute-force oracles."""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DataError
from .events import EventSequence
from .kernel import grid_size

log = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    precision: float | None = None
    recall: float | None = None
    tp: int | None = None
    fp: int | None = None
    fn: int | None = None
    tn: int | None = None
    param_error_l2: float | None = None
    nll: float | None = None
    nll_policy: str | None = None
    nll_normalization: str | None = None
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None and v != []}

    def to_text(self) -> str:
        lines = []
        for key, value in self.as_dict().items():
            if key == "notes":
                lines.extend(f"note={n}" for n in value)
            else:
                lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
        return "\n".join(lines) + "\n"


def confusion(predicted, truth) -> tuple:
    predicted = np.asarray(predicted, dtype=int).ravel()
    truth = np.asarray(truth, dtype=int).ravel()
    if predicted.shape != truth.shape:
        raise DataError(f"label length mismatch: {predicted.size} predicted vs {truth.size} true")
    tp = int(np.sum((predicted == 1) & (truth == 1)))
    fp = int(np.sum((predicted == 1) & (truth == 0)))
    fn = int(np.sum((predicted == 0) & (truth == 1)))
    tn = int(np.sum((predicted == 0) & (truth == 0)))
    return tp, fp, fn, tn


def rho_precision_recall(predicted, truth) -> tuple:
    """Precision and recall with the structured label 1 as the positive class.

    An empty denominator gives 1.0.
    """
    tp, fp, fn, _ = confusion(predicted, truth)
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    return precision, recall


def _coords(params, which) -> np.ndarray:
    values = []
    for name in which:
        if name == "mu":
            values.extend(params.mu)
        elif name == "mu_tilde":
            values.extend(params.mu_tilde)
        else:
            for row in params.kernels:
                for k in row:
                    if name not in k.param_names:
                        raise DataError(f"kernel family {k.family} has no parameter {name!r}")
                    values.append(getattr(k, name))
    return np.asarray(values, dtype=float)


def default_error_coords(params) -> tuple:
    return ("mu",) + params.kernels[0][0].param_names


def param_error(est, true, which=None) -> float:
    """Euclidean distance between two parameter sets over the named coordinates
    (default: ``mu`` and every kernel parameter)."""
    if est.family != true.family:
        raise DataError(f"kernel family mismatch: {est.family} vs {true.family}")
    which = tuple(which) if which is not None else default_error_coords(true)
    return float(np.linalg.norm(_coords(est, which) - _coords(true, which)))


def test_nll(params, test_seq: EventSequence, delta: float, rho_policy: str = "mixture") -> float:
    """Per-event negative log-likelihood of ``test_seq`` on the grid.

    The excitation uses every past test event with weight one. ``mixture``
    includes the noise intensity ``mu_tilde f0``; ``hawkes-only`` drops it.
    The compensator is the Riemann sum ``delta * sum_{s=1}^{G} lambda_g(s delta)``.
    """
    from .estimator import excitation, discretized_kernels
    from .grid import discretize_events, weighted_vector

    if rho_policy not in ("mixture", "hawkes-only"):
        raise DataError(f"unknown rho_policy {rho_policy!r}")
    N = test_seq.n_events()
    if N == 0:
        raise DataError("test set has no events")
    mm = params.mark_model
    dseq = discretize_events(test_seq, delta, mm)
    ones = [np.ones(n) for n in dseq.n_pseudo]
    zt = [weighted_vector(dseq, ones, j) for j in range(dseq.D)]
    phi, _ = discretized_kernels(params, delta)
    e = excitation(phi, zt, dseq.G)
    noise = params.mu_tilde if rho_policy == "mixture" else np.zeros(params.D)
    log_sum = 0.0
    compensator = 0.0
    for i in range(params.D):
        times = np.asarray(test_seq.times[i], dtype=float)
        marks = np.asarray(test_seq.marks[i], dtype=float)
        bins = np.clip(np.floor(times / delta + 0.5).astype(np.int64), 0, dseq.G)
        lam = (params.mu[i] + e[i, bins]) * mm.density("f1", marks) + noise[i] * mm.density("f0", marks)
        if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            log.warning("test_nll: zero or non-finite intensity at %d event(s)",
                        int(np.sum(~(lam > 0))))
            return math.inf
        log_sum += float(np.sum(np.log(lam)))
        compensator += delta * float(np.sum(params.mu[i] + noise[i] + e[i, 1:]))
    return -(log_sum - compensator) / N


NAIVE_MAX_WORK = 1e8


def naive_loss_oracle(params, rho, seq: EventSequence, delta: float, W: float | None = None) -> float:
    """Mean-field loss by materialising the intensity on every grid node.

    ``rho`` holds one weight per original event; events sharing a grid node
    must carry the same weight. Intended for small instances only.
    """
    mm = params.mark_model
    W = params.W if W is None else W
    T = seq.T
    G = int(math.floor(T / delta + 1e-9))
    L = grid_size(W, delta)
    if G * L * max(seq.n_events(), 1) > NAIVE_MAX_WORK:
        raise DataError("instance too large for the naive oracle")
    D = params.D
    kern = [[params.kernels[i][j].evaluate(np.arange(L + 1) * delta) for j in range(D)] for i in range(D)]

    # node -> [weight, sum f1, sum f0, rho]
    nodes = []
    for j in range(D):
        acc = defaultdict(lambda: [0.0, 0.0, 0.0, None])
        for t, k, r in zip(seq.times[j], seq.marks[j], rho[j]):
            s = min(max(int(math.floor(t / delta + 0.5)), 0), G)
            entry = acc[s]
            if entry[3] is not None and entry[3] != r:
                raise DataError("events sharing a grid node must share one mixture weight")
            entry[0] += float(mm.omega(k))
            entry[1] += float(mm.density("f1", k))
            entry[2] += float(mm.density("f0", k))
            entry[3] = float(r)
        nodes.append([(s, *acc[s]) for s in sorted(acc)])

    total = 0.0
    for i in range(D):
        exc = [0.0] * (G + 1)
        var = [0.0] * (G + 1)
        for j in range(D):
            for s, w, _, _, r in nodes[j]:
                for tau in range(1, L + 1):
                    if s + tau > G:
                        break
                    exc[s + tau] += kern[i][j][tau] * r * w
                    var[s + tau] += kern[i][j][tau] ** 2 * w * w * r * (1 - r)
        mu, mut = params.mu[i], params.mu_tilde[i]
        sq = sum(2 * mu * exc[s] + exc[s] ** 2 for s in range(1, G + 1))
        total += T * (mm.H1 * mu ** 2 + mm.H0 * mut ** 2) + delta * mm.H1 * sq
        total += delta * sum(var[1:])
        for s, w, f1, f0, r in nodes[i]:
            total -= 2 * ((1 - r) * mut * f0 + r * f1 * (mu + exc[s]))
    return float(total)
