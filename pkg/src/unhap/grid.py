"""Projection of event streams on the regular grid ``{0, delta, ..., G delta}``."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .events import EventSequence
from .marks import MarkModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TypeGrid:
    """Grid view of the events of one type.

    Events sharing a grid node are merged into one pseudo-event: weights and
    mark densities add up, the reported mark is the omega-weighted mean mark,
    and a single mixture weight is shared.
    """

    bins: np.ndarray          # node index of each pseudo-event, strictly increasing
    weights: np.ndarray       # omega(kappa) summed over merged events
    kappa: np.ndarray         # representative mark of each pseudo-event
    f1: np.ndarray            # f1(kappa) summed over merged events
    f0: np.ndarray
    event_to_pseudo: np.ndarray
    z: np.ndarray             # dense weight vector of length G + 1
    n_merged: int

    @property
    def n(self) -> int:
        return len(self.bins)


@dataclass(frozen=True)
class DiscretizedSequence:
    delta: float
    G: int
    T: float
    types: tuple
    mark_model: MarkModel

    @property
    def D(self) -> int:
        return len(self.types)

    @property
    def n_pseudo(self) -> list:
        return [g.n for g in self.types]

    @property
    def n_merged(self) -> int:
        return sum(g.n_merged for g in self.types)


def _project_type(times, marks, delta, G, mm: MarkModel) -> TypeGrid:
    times = np.asarray(times, dtype=float)
    marks = np.asarray(marks, dtype=float)
    raw = np.floor(times / delta + 0.5).astype(np.int64)
    raw = np.clip(raw, 0, G)
    bins, inverse, counts = np.unique(raw, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    omega = mm.omega(marks)
    weights = np.bincount(inverse, weights=omega, minlength=len(bins))
    kappa = np.empty(len(bins))
    single = counts == 1
    kappa[inverse[single[inverse]]] = marks[single[inverse]]
    multi = ~single
    if np.any(multi):
        wk = np.bincount(inverse, weights=omega * marks, minlength=len(bins))
        plain = np.bincount(inverse, weights=marks, minlength=len(bins)) / counts
        with np.errstate(invalid="ignore", divide="ignore"):
            weighted = np.where(weights > 0, wk / np.where(weights > 0, weights, 1.0), plain)
        kappa[multi] = weighted[multi]
    z = np.zeros(G + 1)
    z[bins] = weights
    return TypeGrid(
        bins=bins,
        weights=weights,
        kappa=kappa,
        f1=np.bincount(inverse, weights=mm.density("f1", marks), minlength=len(bins)),
        f0=np.bincount(inverse, weights=mm.density("f0", marks), minlength=len(bins)),
        event_to_pseudo=inverse,
        z=z,
        n_merged=int(len(times) - len(bins)),
    )


def discretize_events(seq: EventSequence, delta: float, mark_model: MarkModel) -> DiscretizedSequence:
    """Map every event to its nearest grid node; events past ``G delta`` go to node ``G``."""
    if not delta > 0:
        raise ConfigError(f"grid step delta must be > 0, got {delta}")
    if delta >= seq.T:
        raise ConfigError(f"grid step delta={delta} must be smaller than T={seq.T}")
    G = int(math.floor(seq.T / delta + 1e-9))
    types = tuple(_project_type(t, k, delta, G, mark_model) for t, k in zip(seq.times, seq.marks))
    merged = sum(g.n_merged for g in types)
    if merged:
        log.warning("grid projection merged %d event(s) sharing a node (delta=%g)", merged, delta)
    return DiscretizedSequence(delta=delta, G=G, T=float(seq.T), types=types, mark_model=mark_model)


def weighted_vector(dseq: DiscretizedSequence, rho, j: int) -> np.ndarray:
    """Dense ``rho * z`` for type ``j``; ``rho`` holds one value per pseudo-event."""
    rho_j = np.asarray(getattr(rho, "rho", rho)[j], dtype=float)
    grid = dseq.types[j]
    if rho_j.shape != grid.bins.shape:
        raise DataError(f"type {j}: {rho_j.shape[0]} mixture weights for {grid.n} pseudo-events")
    out = np.zeros(dseq.G + 1)
    out[grid.bins] = rho_j * grid.weights
    return out


def dense(dseq: DiscretizedSequence, values, j: int) -> np.ndarray:
    """Scatter per-pseudo-event ``values`` of type ``j`` into a grid vector."""
    out = np.zeros(dseq.G + 1)
    out[dseq.types[j].bins] = values
    return out
