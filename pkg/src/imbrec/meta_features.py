"""Dataset characterization: the 43 meta-features driving recommendations.

Five groups: simple counts, dimensionality (examples per dimension and PCA
intrinsic dimension), feature-target correlation, linear-model fit quality,
and smoothness of the target over the feature space.  Residual- and
distance-based measures are computed on min-max normalized features and
target so their magnitudes (and the fixed 0.1 residual threshold) are
comparable across datasets; rank-based measures use the raw data.

The interpolation-based measures draw their random pairs from a generator
seeded by the dataset's name alone, so extraction is a pure function of the
dataset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.stats import rankdata

from .dataset import Dataset, derive_seed
from .relevance import RelevanceFunction, phi

#: Relevance threshold for the n.rare/p.rare counts.  Strictly greater-than,
#: fixed independently of the pipeline threshold.
RARE_COUNT_THRESHOLD = 0.8

_SIMPLE = ("n.examples", "n.attributes", "n.rare", "p.rare")
_DIMENSIONALITY = ("T2", "T3", "T4")
_CORRELATION = (
    "C2.avg", "C2.max", "C2.min", "C2.sd",
    "C3.avg", "C3.max", "C3.min", "C3.sd",
    "C4.avg",
)
_LINEARITY = (
    "L1.avg", "L1.max", "L1.min", "L1.sd",
    "L2.avg", "L2.max", "L2.min",
    "L3.avg", "L3.max", "L3.min", "L3.sd",
)
_SMOOTHNESS = (
    "S1.avg", "S1.max", "S1.min", "S1.sd",
    "S2.avg", "S2.max", "S2.min", "S2.sd",
    "S3.avg", "S3.max", "S3.min", "S3.sd",
    "S4.avg", "S4.max", "S4.min", "S4.sd",
)

META_FEATURE_NAMES: tuple[str, ...] = (
    _SIMPLE + _DIMENSIONALITY + _CORRELATION + _LINEARITY + _SMOOTHNESS
)
assert len(META_FEATURE_NAMES) == 43


@dataclass(frozen=True)
class MetaFeatureVector:
    """The 43 meta-feature values of one dataset, in fixed documented order."""

    values: np.ndarray
    names: tuple[str, ...] = META_FEATURE_NAMES

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64).ravel()
        if vals.size != len(self.names):
            raise ValueError(f"expected {len(self.names)} values, got {vals.size}")
        if not np.isfinite(vals).all():
            raise ValueError("meta-feature values must be finite")
        object.__setattr__(self, "values", vals)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def _aggregate(values: np.ndarray) -> dict[str, float]:
    """avg/max/min/sd of a per-item list; sd is sample sd, 0 for one item."""
    v = np.asarray(values, dtype=np.float64)
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return {"avg": float(v.mean()), "max": float(v.max()), "min": float(v.min()), "sd": sd}


def _minmax(a: np.ndarray) -> np.ndarray:
    """Column-wise min-max normalization; constant columns map to 0."""
    a = np.asarray(a, dtype=np.float64)
    lo = a.min(axis=0)
    span = a.max(axis=0) - lo
    span = np.where(span == 0.0, 1.0, span)
    return (a - lo) / span


def _spearman(x: np.ndarray, y: np.ndarray) -> float:
    """Spearman rank correlation with average-rank ties; 0 when undefined."""
    rx = rankdata(x)
    ry = rankdata(y)
    sx = rx.std()
    sy = ry.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(np.mean((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))


def spearman_abs(d: Dataset) -> np.ndarray:
    """Per-feature |Spearman correlation| with the target."""
    return np.array([abs(_spearman(d.features[:, j], d.target)) for j in range(d.d)])


def simple_measures(d: Dataset, f: RelevanceFunction, t_r: float) -> dict[str, float]:
    """Row/column counts plus the rare-case count and percentage."""
    rel = np.asarray(phi(f, d.target))
    n_rare = int(np.sum(rel > RARE_COUNT_THRESHOLD))
    return {
        "n.examples": float(d.n),
        "n.attributes": float(d.d),
        "n.rare": float(n_rare),
        "p.rare": 100.0 * n_rare / d.n,
    }


def dimensionality_measures(d: Dataset) -> dict[str, float]:
    """T2 = n/d plus PCA intrinsic-dimension ratios T3 = m'/n, T4 = m'/d.

    m' is the smallest number of principal components (eigen-decomposition
    of the covariance of standardized features, zero-variance columns
    dropped) reaching 95% cumulative explained variance.
    """
    x = d.features
    sd = x.std(axis=0)
    kept = x[:, sd > 0.0]
    if kept.shape[1] == 0:
        m_prime = 0
    else:
        z = (kept - kept.mean(axis=0)) / kept.std(axis=0)
        eigvals = np.linalg.eigvalsh(np.cov(z, rowvar=False, ddof=1))
        eigvals = np.clip(eigvals[::-1], 0.0, None)
        total = eigvals.sum()
        if total <= 0.0:
            m_prime = 0
        else:
            ratios = np.cumsum(eigvals) / total
            m_prime = int(np.searchsorted(ratios, 0.95 - 1e-12) + 1)
    return {"T2": d.n / d.d, "T3": m_prime / d.n, "T4": m_prime / d.d}


def _greedy_removals_for_correlation(
    x: np.ndarray, y: np.ndarray, threshold: float = 0.9
) -> int:
    """Examples removed (greedily) until |Spearman| exceeds ``threshold``.

    Each step drops the example whose removal maximizes the resulting
    |correlation| (ties to the smallest index), recomputed from scratch.
    Stops when the threshold is passed or fewer than 3 examples remain.
    """
    keep = np.arange(len(y))
    removed = 0
    while len(keep) >= 3:
        if abs(_spearman(x[keep], y[keep])) > threshold:
            return removed
        best_rho = -1.0
        best_i = 0
        for i in range(len(keep)):
            sub = np.delete(keep, i)
            rho = abs(_spearman(x[sub], y[sub]))
            if rho > best_rho:
                best_rho = rho
                best_i = i
        keep = np.delete(keep, best_i)
        removed += 1
    return removed


def correlation_measures(d: Dataset) -> dict[str, float]:
    """Correlation group: C1, C2 aggregates, C3 aggregates, C4.avg.

    C1 is the maximum per-feature |Spearman| (identical to C2.max, kept for
    reference but not part of the 43-vector).  C3 divides the greedy removal
    count by n per feature.  C4 iteratively fits the most-correlated
    remaining feature and discards examples it explains (|residual| <= 0.1
    on normalized data), returning the fraction never explained.
    """
    rho = spearman_abs(d)
    out = {"C1": float(rho.max())}
    out.update({f"C2.{k}": v for k, v in _aggregate(rho).items()})

    removals = np.array(
        [
            _greedy_removals_for_correlation(d.features[:, j], d.target) / d.n
            for j in range(d.d)
        ]
    )
    out.update({f"C3.{k}": v for k, v in _aggregate(removals).items()})

    xn = _minmax(d.features)
    yn = _minmax(d.target.reshape(-1, 1)).ravel()
    remaining = np.arange(d.n)
    pool = list(range(d.d))
    while pool and len(remaining) > 0:
        rhos = [abs(_spearman(xn[remaining, j], yn[remaining])) for j in pool]
        j = pool.pop(int(np.argmax(rhos)))
        a = np.column_stack([np.ones(len(remaining)), xn[remaining, j]])
        coef, *_ = np.linalg.lstsq(a, yn[remaining], rcond=None)
        resid = yn[remaining] - a @ coef
        remaining = remaining[np.abs(resid) > 0.1]
    out["C4.avg"] = len(remaining) / d.n
    return out


def _ols_residuals(xn: np.ndarray, yn: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares residuals and coefficients (intercept first).

    Singular systems fall back to the pseudo-inverse solution inside lstsq.
    """
    a = np.column_stack([np.ones(xn.shape[0]), xn])
    coef, *_ = np.linalg.lstsq(a, yn, rcond=None)
    return yn - a @ coef, coef


def _interpolated_points(
    xn: np.ndarray, yn: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """n random interpolants between target-consecutive example pairs."""
    order = np.argsort(yn, kind="stable")
    xs = xn[order]
    ys = yn[order]
    n = len(ys)
    pair = rng.integers(0, n - 1, size=n)
    u = rng.random(n)
    x_new = xs[pair] + u[:, None] * (xs[pair + 1] - xs[pair])
    y_new = ys[pair] + u * (ys[pair + 1] - ys[pair])
    return x_new, y_new


def linearity_measures(d: Dataset) -> dict[str, float]:
    """L1/L2 residual aggregates of an OLS fit plus interpolation error L3.

    Computed on min-max normalized features and target.  L3 evaluates the
    fitted model on random interpolants of target-sorted neighbor pairs.
    """
    xn = _minmax(d.features)
    yn = _minmax(d.target.reshape(-1, 1)).ravel()
    resid, coef = _ols_residuals(xn, yn)
    out = {f"L1.{k}": v for k, v in _aggregate(np.abs(resid)).items()}
    sq = _aggregate(resid**2)
    out.update({f"L2.{k}": sq[k] for k in ("avg", "max", "min")})

    rng = np.random.default_rng(derive_seed(0, ["meta-features", d.name, "l3"]))
    x_new, y_new = _interpolated_points(xn, yn, rng)
    pred = np.column_stack([np.ones(len(y_new)), x_new]) @ coef
    out.update({f"L3.{k}": v for k, v in _aggregate((pred - y_new) ** 2).items()})
    return out


def _mst_edges(xn: np.ndarray) -> list[tuple[int, int]]:
    """Kruskal MST on the complete Euclidean graph.

    Edge weights are pairwise distances; equal weights are taken in
    lexicographic (i, j) order, which is the native order of the condensed
    distance matrix under a stable sort.
    """
    n = xn.shape[0]
    weights = pdist(xn)
    order = np.argsort(weights, kind="stable")
    ii, jj = np.triu_indices(n, k=1)
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    edges: list[tuple[int, int]] = []
    for e in order:
        a, b = find(int(ii[e])), find(int(jj[e]))
        if a != b:
            parent[a] = b
            edges.append((int(ii[e]), int(jj[e])))
            if len(edges) == n - 1:
                break
    return edges


def smoothness_measures(d: Dataset) -> dict[str, float]:
    """Smoothness group S1-S4 on min-max normalized features and target.

    S1: target gaps along MST edges.  S2: feature distances between
    target-consecutive examples (the average divides the pair sum by n).
    S3: leave-one-out 1-NN squared target error.  S4: 1-NN squared error on
    random interpolants, with the 1-NN fitted on the original examples.
    """
    xn = _minmax(d.features)
    yn = _minmax(d.target.reshape(-1, 1)).ravel()
    n = d.n

    gaps = np.array([abs(yn[i] - yn[j]) for i, j in _mst_edges(xn)])
    out = {f"S1.{k}": v for k, v in _aggregate(gaps).items()}

    order = np.argsort(yn, kind="stable")
    steps = np.linalg.norm(np.diff(xn[order], axis=0), axis=1)
    s2 = _aggregate(steps)
    s2["avg"] = float(steps.sum() / n)
    out.update({f"S2.{k}": v for k, v in s2.items()})

    dist = cdist(xn, xn)
    np.fill_diagonal(dist, np.inf)
    nearest = np.argmin(dist, axis=1)
    out.update({f"S3.{k}": v for k, v in _aggregate((yn[nearest] - yn) ** 2).items()})

    rng = np.random.default_rng(derive_seed(0, ["meta-features", d.name, "s4"]))
    x_new, y_new = _interpolated_points(xn, yn, rng)
    nn = np.argmin(cdist(x_new, xn), axis=1)
    out.update({f"S4.{k}": v for k, v in _aggregate((yn[nn] - y_new) ** 2).items()})
    return out


def extract(d: Dataset, f: RelevanceFunction, t_r: float) -> MetaFeatureVector:
    """Concatenate the five measure groups into the 43-vector."""
    table: dict[str, float] = {}
    table.update(simple_measures(d, f, t_r))
    table.update(dimensionality_measures(d))
    table.update(correlation_measures(d))
    table.update(linearity_measures(d))
    table.update(smoothness_measures(d))
    return MetaFeatureVector(np.array([table[name] for name in META_FEATURE_NAMES]))
