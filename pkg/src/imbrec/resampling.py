"""Training-set resampling strategies for imbalanced regression.

Seven preprocessing options: NONE, random over/under-sampling, SmoteR-style
interpolation, Gaussian-noise replication, a SmoteR/noise hybrid, and
relevance-weighted combination (WERCS).  All are pure functions of
(dataset, relevance function, parameters, seed): same inputs, same output
rows, so grids of strategy applications can run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import Dataset, ceil_count
from .relevance import RelevanceFunction, phi, split_rare_normal

KIND_NONE = "NONE"
KIND_SMOTER = "SMT"
KIND_RANDOM_OVER = "RO"
KIND_RANDOM_UNDER = "RU"
KIND_GAUSSIAN = "GN"
KIND_SMOGN = "SG"
KIND_WERCS = "WERCS"

#: Registry order follows the conventional presentation; ties elsewhere are
#: always broken lexicographically, never by this order.
RESAMPLER_KINDS = (
    KIND_NONE,
    KIND_SMOTER,
    KIND_RANDOM_OVER,
    KIND_RANDOM_UNDER,
    KIND_GAUSSIAN,
    KIND_SMOGN,
    KIND_WERCS,
)

DEFAULT_PARAMS: dict[str, dict[str, float]] = {
    KIND_NONE: {},
    KIND_SMOTER: {"k": 5, "over_pct": 1.0, "under_pct": 0.5},
    KIND_RANDOM_OVER: {"over_pct": 1.0},
    KIND_RANDOM_UNDER: {"under_pct": 0.5},
    KIND_GAUSSIAN: {"delta": 0.05, "over_pct": 1.0, "under_pct": 0.5},
    KIND_SMOGN: {"k": 5, "delta": 0.05, "over_pct": 1.0, "under_pct": 0.5},
    KIND_WERCS: {"over_fraction": 0.5, "under_fraction": 0.5},
}


class ResamplingError(ValueError):
    """A strategy's preconditions are not met by the given dataset."""


@dataclass(frozen=True)
class ResamplingSpec:
    """A resampling strategy choice with its parameters and seed.

    ``params`` overrides the kind's defaults; unknown keys are rejected.
    ``t_r`` is ignored by NONE and WERCS, which need no threshold.
    """

    kind: str
    t_r: float = 0.8
    params: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in RESAMPLER_KINDS:
            raise ValueError(
                f"unknown resampling kind {self.kind!r}; expected one of {RESAMPLER_KINDS}"
            )
        if not 0.0 <= self.t_r <= 1.0:
            raise ValueError(f"t_r must be in [0, 1], got {self.t_r}")
        merged = self.effective_params()
        if merged.get("k", 1) < 1:
            raise ValueError("k must be at least 1")
        if merged.get("delta", 1.0) <= 0.0:
            raise ValueError("delta must be positive")
        for key in ("over_pct", "under_pct"):
            if merged.get(key, 0.0) < 0.0:
                raise ValueError(f"{key} must be nonnegative")
        for key in ("over_fraction", "under_fraction"):
            if not 0.0 <= merged.get(key, 0.0) <= 1.0:
                raise ValueError(f"{key} must be in [0, 1]")

    def effective_params(self) -> dict[str, float]:
        defaults = DEFAULT_PARAMS[self.kind]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValueError(
                f"unknown parameter(s) {sorted(unknown)} for strategy {self.kind}"
            )
        return {**defaults, **self.params}


def apply(spec: ResamplingSpec, d: Dataset, f: RelevanceFunction) -> Dataset:
    """Apply the strategy named by ``spec`` to a training set.

    NONE returns the dataset unchanged; every other kind dispatches to its
    implementation below.  The output always has the input's column schema.
    """
    p = spec.effective_params()
    if spec.kind == KIND_NONE:
        return d
    if spec.kind == KIND_RANDOM_UNDER:
        return random_under(d, f, spec.t_r, p["under_pct"], spec.seed)
    if spec.kind == KIND_RANDOM_OVER:
        return random_over(d, f, spec.t_r, p["over_pct"], spec.seed)
    if spec.kind == KIND_SMOTER:
        return smoter(d, f, spec.t_r, int(p["k"]), p["over_pct"], p["under_pct"], spec.seed)
    if spec.kind == KIND_GAUSSIAN:
        return gaussian_noise(
            d, f, spec.t_r, p["delta"], p["over_pct"], p["under_pct"], spec.seed
        )
    if spec.kind == KIND_SMOGN:
        return smogn(
            d, f, spec.t_r, int(p["k"]), p["delta"], p["over_pct"], p["under_pct"], spec.seed
        )
    if spec.kind == KIND_WERCS:
        return wercs(d, f, p["over_fraction"], p["under_fraction"], spec.seed)
    raise AssertionError(f"unhandled kind {spec.kind}")


def _sampled_normal_indices(
    normal: np.ndarray, under_pct: float, rng: np.random.Generator
) -> np.ndarray:
    """Uniform sample (without replacement) of the normal rows to keep."""
    n_keep = min(len(normal), ceil_count(len(normal), under_pct))
    if n_keep == len(normal):
        return normal
    if n_keep == 0:
        return normal[:0]
    return normal[rng.choice(len(normal), size=n_keep, replace=False)]


def random_under(
    d: Dataset, f: RelevanceFunction, t_r: float, under_pct: float, seed: int
) -> Dataset:
    """Keep all rare rows and a uniform fraction of the normal rows."""
    if not 0.0 < under_pct <= 1.0:
        raise ValueError(f"under_pct must be in (0, 1], got {under_pct}")
    rare, normal = split_rare_normal(d, f, t_r)
    if len(normal) == 0:
        raise ResamplingError("nothing to under-sample: no normal cases")
    if len(rare) == 0:
        raise ResamplingError("no rare cases")
    rng = np.random.default_rng(seed)
    keep = np.sort(np.concatenate([rare, _sampled_normal_indices(normal, under_pct, rng)]))
    return d.take(keep)


def random_over(
    d: Dataset, f: RelevanceFunction, t_r: float, over_pct: float, seed: int
) -> Dataset:
    """Keep all rows and append uniform-with-replacement copies of rare rows."""
    if over_pct < 0.0:
        raise ValueError(f"over_pct must be nonnegative, got {over_pct}")
    rare, _ = split_rare_normal(d, f, t_r)
    if len(rare) == 0:
        raise ResamplingError("no rare cases")
    n_new = ceil_count(len(rare), over_pct)
    rng = np.random.default_rng(seed)
    extra = rare[rng.integers(0, len(rare), size=n_new)]
    return d.with_rows(
        np.vstack([d.features, d.features[extra]]),
        np.concatenate([d.target, d.target[extra]]),
    )


def _rare_neighbor_table(rare_x: np.ndarray, k: int) -> np.ndarray:
    """Indices (into the rare set) of each rare row's k nearest rare rows.

    Euclidean distance; ties resolved toward the smaller index.
    """
    dist = cdist(rare_x, rare_x)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")
    return order[:, :k]


def _interpolate_pair(
    x_seed: np.ndarray,
    y_seed: float,
    x_nb: np.ndarray,
    y_nb: float,
    categorical: tuple[int, ...],
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """One synthetic case on the seed-neighbor segment.

    A single uniform draw places the numeric features; integer-encoded
    categorical features copy either source with equal probability; the
    target is the inverse-distance weighted average of the two sources.
    """
    u = rng.random()
    x_new = x_seed + u * (x_nb - x_seed)
    for c in categorical:
        x_new[c] = x_seed[c] if rng.random() < 0.5 else x_nb[c]
    d_seed = float(np.linalg.norm(x_new - x_seed))
    d_nb = float(np.linalg.norm(x_new - x_nb))
    total = d_seed + d_nb
    if total == 0.0 or d_seed == d_nb:
        y_new = 0.5 * (y_seed + y_nb)
    else:
        y_new = (d_nb * y_seed + d_seed * y_nb) / total
    return x_new, y_new


def smoter(
    d: Dataset,
    f: RelevanceFunction,
    t_r: float,
    k: int,
    over_pct: float,
    under_pct: float,
    seed: int,
) -> Dataset:
    """Under-sample normal rows and add interpolated synthetic rare rows.

    Each synthetic case interpolates a random rare row toward one of its k
    nearest rare neighbors (k capped at the rare count minus one), so its
    features stay on the segment between the two sources and its target
    between their targets.
    """
    rare, normal = split_rare_normal(d, f, t_r)
    if len(rare) < 2:
        raise ResamplingError("SmoteR needs at least 2 rare cases")
    rng = np.random.default_rng(seed)
    base = np.sort(np.concatenate([rare, _sampled_normal_indices(normal, under_pct, rng)]))

    n_new = ceil_count(len(rare), over_pct)
    k_eff = min(k, len(rare) - 1)
    neighbors = _rare_neighbor_table(d.features[rare], k_eff)
    new_x = np.empty((n_new, d.d))
    new_y = np.empty(n_new)
    for i in range(n_new):
        s = int(rng.integers(0, len(rare)))
        nb = int(neighbors[s, rng.integers(0, k_eff)])
        new_x[i], new_y[i] = _interpolate_pair(
            d.features[rare[s]].copy(),
            float(d.target[rare[s]]),
            d.features[rare[nb]],
            float(d.target[rare[nb]]),
            d.categorical,
            rng,
        )
    return d.with_rows(
        np.vstack([d.features[base], new_x]),
        np.concatenate([d.target[base], new_y]),
    )


def gaussian_noise(
    d: Dataset,
    f: RelevanceFunction,
    t_r: float,
    delta: float,
    over_pct: float,
    under_pct: float,
    seed: int,
) -> Dataset:
    """Under-sample normal rows and add noise-perturbed copies of rare rows.

    Numeric features and the target are jittered by N(0, delta * sd(column))
    with the standard deviation taken over the input dataset; zero-variance
    columns and categorical columns pass through unchanged.
    """
    rare, normal = split_rare_normal(d, f, t_r)
    if len(rare) == 0:
        raise ResamplingError("no rare cases")
    rng = np.random.default_rng(seed)
    base = np.sort(np.concatenate([rare, _sampled_normal_indices(normal, under_pct, rng)]))

    n_new = ceil_count(len(rare), over_pct)
    scales = delta * d.features.std(axis=0)
    scales[list(d.categorical)] = 0.0
    y_scale = delta * d.target.std()
    src = rare[rng.integers(0, len(rare), size=n_new)]
    new_x = d.features[src] + rng.normal(size=(n_new, d.d)) * scales
    new_y = d.target[src] + rng.normal(size=n_new) * y_scale
    return d.with_rows(
        np.vstack([d.features[base], new_x]),
        np.concatenate([d.target[base], new_y]),
    )


def smogn(
    d: Dataset,
    f: RelevanceFunction,
    t_r: float,
    k: int,
    delta: float,
    over_pct: float,
    under_pct: float,
    seed: int,
) -> Dataset:
    """SmoteR/Gaussian hybrid keyed on the seed row's neighborhood radius.

    For each synthetic case, a neighbor closer than half the median distance
    to the seed's k nearest rare rows is interpolated as in SmoteR;
    otherwise the seed is perturbed with Gaussian noise whose scale is
    capped at that half-median radius.  Row counts match smoter's for the
    same parameters.
    """
    rare, normal = split_rare_normal(d, f, t_r)
    if len(rare) < 2:
        raise ResamplingError("SMOGN needs at least 2 rare cases")
    rng = np.random.default_rng(seed)
    base = np.sort(np.concatenate([rare, _sampled_normal_indices(normal, under_pct, rng)]))

    n_new = ceil_count(len(rare), over_pct)
    k_eff = min(k, len(rare) - 1)
    rare_x = d.features[rare]
    dist = cdist(rare_x, rare_x)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]
    sd_scales = delta * d.features.std(axis=0)
    y_sd_scale = delta * d.target.std()
    numeric = [j for j in range(d.d) if j not in d.categorical]

    new_x = np.empty((n_new, d.d))
    new_y = np.empty(n_new)
    for i in range(n_new):
        s = int(rng.integers(0, len(rare)))
        neighbor_dists = dist[s, order[s]]
        radius = 0.5 * float(np.median(neighbor_dists))
        nb = int(order[s, rng.integers(0, k_eff)])
        if dist[s, nb] < radius:
            new_x[i], new_y[i] = _interpolate_pair(
                rare_x[s].copy(),
                float(d.target[rare[s]]),
                rare_x[nb],
                float(d.target[rare[nb]]),
                d.categorical,
                rng,
            )
        else:
            row = rare_x[s].copy()
            for j in numeric:
                row[j] += rng.normal() * min(sd_scales[j], radius)
            new_x[i] = row
            new_y[i] = d.target[rare[s]] + rng.normal() * min(y_sd_scale, radius)
    return d.with_rows(
        np.vstack([d.features[base], new_x]),
        np.concatenate([d.target[base], new_y]),
    )


def wercs(
    d: Dataset,
    f: RelevanceFunction,
    over_fraction: float,
    under_fraction: float,
    seed: int,
) -> Dataset:
    """Relevance-weighted over- and under-sampling without a threshold.

    Appends ceil(n * over_fraction) rows drawn with replacement with
    probability proportional to phi(y), then removes ceil(n * under_fraction)
    of the original rows drawn without replacement with probability
    proportional to 1 - phi(y).  The over-sample pool is drawn from the
    original rows before any removal; if every removal weight is zero the
    removal falls back to uniform.
    """
    for nm, v in (("over_fraction", over_fraction), ("under_fraction", under_fraction)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{nm} must be in [0, 1], got {v}")
    rel = np.asarray(phi(f, d.target), dtype=np.float64)
    rng = np.random.default_rng(seed)
    n = d.n

    n_over = ceil_count(n, over_fraction)
    over_idx = np.empty(0, dtype=np.intp)
    if n_over > 0:
        total = rel.sum()
        if total == 0.0:
            raise ResamplingError("all relevance weights are zero; nothing to over-sample")
        over_idx = rng.choice(n, size=n_over, replace=True, p=rel / total)

    n_under = min(n, ceil_count(n, under_fraction))
    keep = np.arange(n)
    if n_under > 0:
        w = 1.0 - rel
        total = w.sum()
        p = None if total == 0.0 else w / total
        removed = rng.choice(n, size=n_under, replace=False, p=p)
        keep = np.setdiff1d(keep, removed)

    if len(keep) + len(over_idx) == 0:
        raise ResamplingError("resampling removed every row")
    return d.with_rows(
        np.vstack([d.features[keep], d.features[over_idx]]),
        np.concatenate([d.target[keep], d.target[over_idx]]),
    )
