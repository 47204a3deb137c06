"""Imbalance-aware evaluation metrics.

SERA integrates the squared error restricted to increasingly relevant
instances over the relevance threshold, so mistakes on rare targets weigh
more.  F1-scoreR treats "predicting a relevant value" as a detection event
and scores its precision/recall.  F1-macro serves the meta level, where the
targets are class labels.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .relevance import RelevanceFunction, phi

METRIC_F1R = "F1R"
METRIC_SERA = "SERA"
METRICS = (METRIC_F1R, METRIC_SERA)

#: Worst-possible stand-in scores for pipelines that could not run.
SENTINEL_SCORE = {METRIC_F1R: -1.0, METRIC_SERA: np.inf}


def higher_is_better(metric: str) -> bool:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    return metric == METRIC_F1R


def _check_pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    yt = np.asarray(y_true, dtype=np.float64).ravel()
    yp = np.asarray(y_pred, dtype=np.float64).ravel()
    if yt.size != yp.size:
        raise ValueError(f"length mismatch: {yt.size} true vs {yp.size} predicted")
    if yt.size == 0:
        raise ValueError("empty vectors")
    return yt, yp


def ser(y_true, y_pred, f: RelevanceFunction, t: float) -> float:
    """Squared error over instances whose true relevance is at least ``t``."""
    yt, yp = _check_pair(y_true, y_pred)
    mask = np.asarray(phi(f, yt)) >= t
    diff = yp[mask] - yt[mask]
    return float(np.dot(diff, diff))


def sera(y_true, y_pred, f: RelevanceFunction, grid_points: int = 1001) -> float:
    """Squared error-relevance area.

    Trapezoidal integral of SER(t) for t in [0, 1] on a uniform grid of
    ``grid_points`` thresholds.  Lower is better; perfect predictions give 0.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    yt, yp = _check_pair(y_true, y_pred)
    rel = np.asarray(phi(f, yt))
    sq = (yp - yt) ** 2

    # SER(t) is a step function of t; evaluate all grid thresholds at once
    # by accumulating errors over instances sorted by relevance.
    order = np.argsort(rel, kind="stable")
    rel_sorted = rel[order]
    # suffix[i] = sum of squared errors with relevance >= rel_sorted[i]
    suffix = np.concatenate([np.cumsum(sq[order][::-1])[::-1], [0.0]])
    ts = np.linspace(0.0, 1.0, grid_points)
    first_at_least = np.searchsorted(rel_sorted, ts, side="left")
    ser_values = suffix[first_at_least]
    return float(np.trapz(ser_values, ts))


def f1_score_r(y_true, y_pred, f: RelevanceFunction, t_r: float) -> float:
    """F1 of the relevance-event detection implied by the predictions.

    An instance is actually relevant when phi(y_true) >= t_r and predicted
    relevant when phi(y_pred) >= t_r.  Conventions: empty predicted set
    scores precision 1 if nothing was relevant, else 0; empty relevant set
    scores recall 1; a 0/0 harmonic mean is 0.
    """
    if not 0.0 <= t_r <= 1.0:
        raise ValueError(f"t_r must be in [0, 1], got {t_r}")
    yt, yp = _check_pair(y_true, y_pred)
    actual = np.asarray(phi(f, yt)) >= t_r
    predicted = np.asarray(phi(f, yp)) >= t_r
    hits = int(np.sum(actual & predicted))
    n_pred = int(np.sum(predicted))
    n_actual = int(np.sum(actual))
    precision = (1.0 if n_actual == 0 else 0.0) if n_pred == 0 else hits / n_pred
    recall = 1.0 if n_actual == 0 else hits / n_actual
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1_macro(labels_true: Sequence, labels_pred: Sequence) -> float:
    """Unweighted mean of per-class F1 over the classes present in the truth.

    Classes never predicted contribute an F1 of 0.
    """
    lt = list(labels_true)
    lp = list(labels_pred)
    if len(lt) != len(lp):
        raise ValueError(f"length mismatch: {len(lt)} true vs {len(lp)} predicted")
    if not lt:
        raise ValueError("empty label vectors")
    scores = []
    for cls in sorted(set(lt)):
        tp = sum(1 for t, p in zip(lt, lp) if t == cls and p == cls)
        n_pred = sum(1 for p in lp if p == cls)
        n_true = sum(1 for t in lt if t == cls)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_true
        f1 = 0.0 if precision + recall == 0.0 else 2 * precision * recall / (precision + recall)
        scores.append(f1)
    return float(np.mean(scores))


def accuracy(labels_true: Sequence, labels_pred: Sequence) -> float:
    """Fraction of exact label matches."""
    lt = list(labels_true)
    lp = list(labels_pred)
    if len(lt) != len(lp):
        raise ValueError(f"length mismatch: {len(lt)} true vs {len(lp)} predicted")
    if not lt:
        raise ValueError("empty label vectors")
    return sum(1 for t, p in zip(lt, lp) if t == p) / len(lt)
