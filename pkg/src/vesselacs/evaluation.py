"""Confusion counting inside the FOV and the three segmentation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionMismatchError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Metrics:
    """Percentages in [0, 100]; None marks a zero-denominator component."""

    sn: float | None
    sp: float | None
    acc: float


def confusion(pred: np.ndarray, truth: np.ndarray,
              fov: np.ndarray | None = None) -> ConfusionCounts:
    """Count tp/fp/tn/fn with vessel as the positive class.

    Counting is restricted to FOV pixels; pass fov=None to count the whole
    image.
    """
    if pred.shape != truth.shape or (fov is not None
                                     and fov.shape != pred.shape):
        raise DimensionMismatchError(
            f"shapes differ: pred {pred.shape}, truth {truth.shape}"
            + ("" if fov is None else f", fov {fov.shape}"))
    if fov is None:
        fov = np.ones(pred.shape, dtype=bool)
    p = pred[fov].astype(bool)
    t = truth[fov].astype(bool)
    return ConfusionCounts(
        tp=int(np.count_nonzero(p & t)),
        fp=int(np.count_nonzero(p & ~t)),
        tn=int(np.count_nonzero(~p & ~t)),
        fn=int(np.count_nonzero(~p & t)))


def metrics(c: ConfusionCounts) -> Metrics:
    """Sensitivity, specificity, accuracy as percentages."""
    if c.total == 0:
        raise DataError("empty FOV: no pixels to score")
    sn = 100.0 * c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else None
    sp = 100.0 * c.tn / (c.tn + c.fp) if (c.tn + c.fp) > 0 else None
    acc = 100.0 * (c.tp + c.tn) / c.total
    return Metrics(sn=sn, sp=sp, acc=acc)


def add(a: ConfusionCounts, b: ConfusionCounts) -> ConfusionCounts:
    return ConfusionCounts(tp=a.tp + b.tp, fp=a.fp + b.fp,
                           tn=a.tn + b.tn, fn=a.fn + b.fn)
