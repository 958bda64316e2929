"""Containers for marked event streams."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError

TIE_EPS = 1e-9


@dataclass(frozen=True)
class MarkedEvent:
    t: float
    kappa: float
    label: Optional[int] = None
    gen: Optional[int] = None


def _strictly_increasing(times: np.ndarray) -> np.ndarray:
    """Push exact ties forward by ``TIE_EPS`` so times strictly increase."""
    times = times.copy()
    for k in range(1, len(times)):
        if times[k] <= times[k - 1]:
            times[k] = times[k - 1] + TIE_EPS
    return times


@dataclass
class EventSequence:
    """Per-type, time-sorted marked events observed on ``[0, T]``.

    ``labels`` (1 structured, 0 noise) and ``gens`` (generation depth, 0 for
    immigrants, -1 for noise) are optional ground truth.
    """

    times: list
    marks: list
    T: float
    labels: Optional[list] = None
    gens: Optional[list] = None

    def __post_init__(self):
        if not self.T > 0:
            raise DataError(f"horizon T must be > 0, got {self.T}")
        if len(self.times) != len(self.marks):
            raise DataError("times and marks must list the same number of types")
        for i, (t, k) in enumerate(zip(self.times, self.marks)):
            if len(t) != len(k):
                raise DataError(f"type {i}: {len(t)} times but {len(k)} marks")

    @classmethod
    def from_unsorted(cls, times, marks, T, labels=None, gens=None) -> "EventSequence":
        """Sort each type by time (stable) and break exact ties."""
        out_t, out_k, out_l, out_g = [], [], [], []
        for i in range(len(times)):
            t = np.asarray(times[i], dtype=float)
            order = np.argsort(t, kind="stable")
            out_t.append(_strictly_increasing(t[order]))
            out_k.append(np.asarray(marks[i], dtype=float)[order])
            if labels is not None:
                out_l.append(np.asarray(labels[i], dtype=int)[order])
            if gens is not None:
                out_g.append(np.asarray(gens[i], dtype=int)[order])
        return cls(out_t, out_k, float(T),
                   out_l if labels is not None else None,
                   out_g if gens is not None else None)

    @property
    def D(self) -> int:
        return len(self.times)

    def n_events(self, i: Optional[int] = None) -> int:
        if i is None:
            return sum(len(t) for t in self.times)
        return len(self.times[i])

    def events(self, i: int = 0) -> list:
        labels = self.labels[i] if self.labels is not None else [None] * self.n_events(i)
        gens = self.gens[i] if self.gens is not None else [None] * self.n_events(i)
        return [
            MarkedEvent(float(t), float(k), None if l is None else int(l), None if g is None else int(g))
            for t, k, l, g in zip(self.times[i], self.marks[i], labels, gens)
        ]

    def has_labels(self) -> bool:
        return self.labels is not None
