"""Isolation of anomalous windows and controlled-accuracy training sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import MultivariateTimeSeries, TimeSeriesWindow
from .errors import InsufficientPool, WindowTooLong


@dataclass(frozen=True)
class LabeledWindowPool:
    positives: tuple[TimeSeriesWindow, ...]
    negatives: tuple[TimeSeriesWindow, ...] = field(default_factory=tuple)

    def __post_init__(self):
        pos, neg = tuple(self.positives), tuple(self.negatives)
        if any(not w.is_anomalous for w in pos):
            raise ValueError("positives must carry a fault label")
        if any(w.is_anomalous for w in neg):
            raise ValueError("negatives must be labeled normal")
        ids = [id(w) for w in pos + neg]
        if len(set(ids)) != len(ids):
            raise ValueError("a window appears twice in the pool")
        object.__setattr__(self, "positives", pos)
        object.__setattr__(self, "negatives", neg)


def _robust_z(values):
    med = np.median(values, axis=0)
    mad = 1.4826 * np.median(np.abs(values - med), axis=0)
    std = values.std(axis=0)
    scale = np.where(mad > 0, mad, std)
    safe = np.where(scale > 0, scale, 1.0)
    return np.where(scale > 0, (values - med) / safe, 0.0)


def threshold_detect(ts: MultivariateTimeSeries, window_len: int, threshold: float,
                     label: str = "anomaly") -> list[TimeSeriesWindow]:
    """Flag collective anomalies with a rolling z-score energy detector.

    Each sample is scored by its mean squared robust z-score over features
    (median/MAD scaling). Every length-``window_len`` window whose mean
    score exceeds ``threshold`` is flagged, and overlapping or touching
    flagged windows are merged into one maximal window.
    """
    n = len(ts)
    if window_len < 1:
        raise ValueError("window_len must be positive")
    if window_len > n:
        raise WindowTooLong(f"window_len {window_len} exceeds series length {n}")
    energy = (_robust_z(ts.values) ** 2).mean(axis=1)
    csum = np.concatenate([[0.0], np.cumsum(energy)])
    rolling = (csum[window_len:] - csum[:-window_len]) / window_len
    flagged = np.flatnonzero(rolling > threshold)

    out = []
    if flagged.size == 0:
        return out
    run_start = prev = int(flagged[0])
    for s in flagged[1:]:
        s = int(s)
        if s > prev + window_len:  # gap: windows neither overlap nor touch
            out.append((run_start, prev + window_len - 1))
            run_start = s
        prev = s
    out.append((run_start, prev + window_len - 1))
    # a single-sample window cannot be represented (start < end)
    return [ts.window(a, b, label) for a, b in out if b > a]


def compose_training_set(pool: LabeledWindowPool, acc: float, n: int, seed) -> list[TimeSeriesWindow]:
    """Draw ``round(acc * n)`` positives and fill the rest with negatives.

    Models an anomaly detector of accuracy ``acc``: the missing positives
    are replaced by normal windows that the detector wrongly flagged.
    """
    if not 0 < acc <= 1:
        raise ValueError(f"acc must lie in (0, 1], got {acc}")
    if n < 1:
        raise ValueError("n must be positive")
    n_neg_needed = math.ceil(round((1 - acc) * n, 9))
    if len(pool.positives) < n or len(pool.negatives) < n_neg_needed:
        raise InsufficientPool(
            f"need {n} positives and {n_neg_needed} negatives, pool has "
            f"{len(pool.positives)} and {len(pool.negatives)}"
        )
    n_pos = int(math.floor(acc * n + 0.5))
    rng = np.random.default_rng(seed)
    pos_idx = rng.choice(len(pool.positives), size=n_pos, replace=False)
    neg_idx = rng.choice(len(pool.negatives), size=n - n_pos, replace=False)
    return [pool.positives[i] for i in sorted(pos_idx)] + [pool.negatives[i] for i in sorted(neg_idx)]


def detection_accuracy(tp: int, tn: int, fp: int, fn: int) -> float:
    """Fraction of correct detections, (TP + TN) / (TP + TN + FP + FN)."""
    total = tp + tn + fp + fn
    if total == 0:
        raise ValueError("no samples")
    return (tp + tn) / total


def composed_accuracy(windows: Sequence[TimeSeriesWindow]) -> float:
    """Accuracy of the detector that produced ``windows`` (every item was flagged anomalous)."""
    tp = sum(w.is_anomalous for w in windows)
    return detection_accuracy(tp, 0, len(windows) - tp, 0)
