"""Target-relevance functions for imbalanced regression.

A relevance function maps each target value to [0, 1], where 1 marks the
rarest (most important) values.  Control points are placed automatically at
the Tukey boxplot's adjacent limits and the median, then joined by a
monotonicity-limited piecewise cubic Hermite interpolant, so relevance is 0
at the median, rises smoothly toward the whiskers, and saturates at 1
beyond them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset


@dataclass(frozen=True)
class ControlPoint:
    """A (target value, relevance, derivative) anchor for the interpolant.

    ``dphi`` of ``None`` lets the fit pick a shape-preserving derivative;
    an explicit value (usually 0 for flat extremes) is kept, subject to the
    monotonicity limiter.
    """

    y: float
    phi: float
    dphi: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"control point relevance must be in [0, 1], got {self.phi}")


@dataclass(frozen=True)
class RelevanceFunction:
    """Monotone piecewise-cubic map from target values to [0, 1].

    Stores the knots, the limited derivatives, and per-interval cubic
    coefficients in the local variable ``(y - y_i)``.  Immutable after
    construction; evaluation is safe from any number of threads.
    """

    ys: np.ndarray
    phis: np.ndarray
    derivs: np.ndarray
    coeffs: np.ndarray  # shape (k-1, 4): c0 + c1*t + c2*t^2 + c3*t^3

    def __call__(self, y) -> np.ndarray | float:
        return phi(self, y)


def _quartiles(target: np.ndarray) -> tuple[float, float, float]:
    """Q1, median, Q3 by linear interpolation of order statistics."""
    q1, med, q3 = np.quantile(target, [0.25, 0.5, 0.75], method="linear")
    return float(q1), float(med), float(q3)


def boxplot_control_points(target: np.ndarray) -> list[ControlPoint]:
    """Three automatic control points from Tukey boxplot statistics.

    Relevance 1 with zero slope at both adjacent limits
    (Q1 - 1.5*IQR and Q3 + 1.5*IQR) and relevance 0 at the median.  When a
    degenerate IQR pulls an adjacent limit onto the wrong side of the
    median, that point is moved just past the corresponding data extreme.
    """
    t = np.asarray(target, dtype=np.float64).ravel()
    if t.size < 2 or np.ptp(t) == 0.0:
        raise ValueError("relevance requires a target with at least 2 distinct values")
    q1, med, q3 = _quartiles(t)
    iqr = q3 - q1
    adj_l = q1 - 1.5 * iqr
    adj_h = q3 + 1.5 * iqr
    lo, hi = float(t.min()), float(t.max())
    eps = 1e-9 * (hi - lo + 1.0)
    if adj_l >= med:
        adj_l = lo - eps
    if adj_h <= med:
        adj_h = hi + eps
    return [
        ControlPoint(adj_l, 1.0, 0.0),
        ControlPoint(med, 0.0, 0.0),
        ControlPoint(adj_h, 1.0, 0.0),
    ]


def _limited_derivatives(
    ys: np.ndarray, phis: np.ndarray, supplied: list[float | None]
) -> np.ndarray:
    """Knot derivatives limited for monotonicity on every interval.

    Missing derivatives start from shape-preserving estimates (weighted
    harmonic mean of adjacent secants inside, secant at the ends); supplied
    ones are taken as given.  All are then clipped so that on each interval
    the Hermite cubic stays between its endpoint values: derivatives whose
    sign opposes the secant become 0, and (alpha, beta) = (d_i, d_{i+1}) /
    secant is scaled back onto the disk of radius 3 when it leaves it.
    """
    k = len(ys)
    h = np.diff(ys)
    delta = np.diff(phis) / h
    d = np.empty(k)
    for i in range(k):
        if supplied[i] is not None:
            d[i] = supplied[i]
        elif i == 0:
            d[i] = delta[0]
        elif i == k - 1:
            d[i] = delta[-1]
        elif delta[i - 1] * delta[i] <= 0.0:
            d[i] = 0.0
        else:
            w1 = 2.0 * h[i] + h[i - 1]
            w2 = h[i] + 2.0 * h[i - 1]
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])
    for i in range(k - 1):
        if delta[i] == 0.0:
            d[i] = 0.0
            d[i + 1] = 0.0
            continue
        alpha = d[i] / delta[i]
        beta = d[i + 1] / delta[i]
        if alpha < 0.0:
            d[i] = 0.0
            alpha = 0.0
        if beta < 0.0:
            d[i + 1] = 0.0
            beta = 0.0
        norm = alpha * alpha + beta * beta
        if norm > 9.0:
            tau = 3.0 / np.sqrt(norm)
            d[i] = tau * alpha * delta[i]
            d[i + 1] = tau * beta * delta[i]
    return d


def fit_relevance(points: list[ControlPoint]) -> RelevanceFunction:
    """Fit the monotone cubic Hermite interpolant through control points.

    Requires at least two points with strictly increasing target values.
    The result passes through every control point exactly, is C1, and never
    leaves [0, 1].
    """
    if len(points) < 2:
        raise ValueError("need at least 2 control points")
    ys = np.array([p.y for p in points], dtype=np.float64)
    phis = np.array([p.phi for p in points], dtype=np.float64)
    if not np.all(np.diff(ys) > 0.0):
        raise ValueError("control point y values must be strictly increasing")
    derivs = _limited_derivatives(ys, phis, [p.dphi for p in points])

    h = np.diff(ys)
    delta = np.diff(phis) / h
    d0, d1 = derivs[:-1], derivs[1:]
    coeffs = np.column_stack(
        [
            phis[:-1],
            d0,
            (3.0 * delta - 2.0 * d0 - d1) / h,
            (d0 + d1 - 2.0 * delta) / (h * h),
        ]
    )
    return RelevanceFunction(ys=ys, phis=phis, derivs=derivs, coeffs=coeffs)


def phi(f: RelevanceFunction, y) -> np.ndarray | float:
    """Evaluate relevance at ``y`` (scalar or array), clamped outside the knots.

    Values beyond the first/last control point take that point's relevance,
    so targets past the adjacent limits are maximally rare under the
    standard construction.
    """
    yv = np.asarray(y, dtype=np.float64)
    scalar = yv.ndim == 0
    yv = np.atleast_1d(yv)
    out = np.empty_like(yv)

    below = yv <= f.ys[0]
    above = yv >= f.ys[-1]
    out[below] = f.phis[0]
    out[above] = f.phis[-1]
    inside = ~(below | above)
    if inside.any():
        yi = yv[inside]
        seg = np.searchsorted(f.ys, yi, side="right") - 1
        t = yi - f.ys[seg]
        c = f.coeffs[seg]
        vals = c[:, 0] + t * (c[:, 1] + t * (c[:, 2] + t * c[:, 3]))
        out[inside] = np.clip(vals, 0.0, 1.0)
    return float(out[0]) if scalar else out


def split_rare_normal(
    d: Dataset, f: RelevanceFunction, t_r: float
) -> tuple[np.ndarray, np.ndarray]:
    """Partition row indices into (rare, normal) by relevance threshold.

    Rare rows satisfy phi(y) >= t_r; the two index arrays are sorted and
    together cover every row exactly once.
    """
    if not 0.0 <= t_r <= 1.0:
        raise ValueError(f"t_r must be in [0, 1], got {t_r}")
    rel = phi(f, d.target)
    rare = np.flatnonzero(rel >= t_r)
    normal = np.flatnonzero(rel < t_r)
    return rare, normal


def relevance_for(d: Dataset) -> RelevanceFunction:
    """Boxplot control points + monotone fit for a dataset's target."""
    return fit_relevance(boxplot_control_points(d.target))
