"""Binary classification scores."""
from __future__ import annotations

import math
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DegenerateClassDistribution


class Confusion(NamedTuple):
    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_predictions(cls, labels, predictions) -> "Confusion":
        y = np.asarray(labels, dtype=np.int64)
        p = np.asarray(predictions, dtype=np.int64)
        return cls(int(((p == 1) & (y == 1)).sum()), int(((p == 1) & (y == 0)).sum()),
                   int(((p == 0) & (y == 1)).sum()), int(((p == 0) & (y == 0)).sum()))


def f_score(c: Confusion) -> float:
    """Harmonic mean of precision and recall on the positive class (0 when undefined)."""
    denom = 2 * c.tp + c.fp + c.fn
    return 2 * c.tp / denom if denom else 0.0


def g_mean(c: Confusion) -> float:
    tpr = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    tnr = c.tn / (c.tn + c.fp) if c.tn + c.fp else 0.0
    return math.sqrt(tpr * tnr)


def auc(scores: Iterable[tuple[float, int]]) -> float:
    """Probability that a random positive outscores a random negative,
    ties counting one half. Exact, via sorted negatives."""
    pairs = list(scores)
    s = np.asarray([p[0] for p in pairs], dtype=float)
    y = np.asarray([p[1] for p in pairs], dtype=np.int64)
    pos = s[y == 1]
    negs = np.sort(s[y == 0])
    if len(pos) == 0 or len(negs) == 0:
        raise DegenerateClassDistribution("AUC needs at least one positive and one negative")
    below = np.searchsorted(negs, pos, side="left")
    tied = np.searchsorted(negs, pos, side="right") - below
    # integer numerator keeps the result exact up to the final division
    num = 2 * int(below.sum()) + int(tied.sum())
    return num / (2 * len(pos) * len(negs))
