"""Synthetic benchmark datasets with known best resampling strategies.

Two generator regimes plant opposite preferences, separable by the rare
percentage alone.  Both exploit how CART-style learners (midpoint splits,
minimum leaf size 5) interact with each strategy's exact mechanics:

* Regime A (low rare share) rewards plain replication.  Rare rows live in
  five-point "sites" of 3 rares interleaved with 2 low-target twins at
  nearly the same location.  Untouched, a site's mean sits below the
  relevance threshold (silent).  Exact copies stack on the rares and lift
  the site's leaf over the threshold (recall); noise-jittered copies
  disperse (the informative axis is scaled so the jitter far exceeds a site
  span) and never amplify; under-sampling shrinks a site below the minimum
  leaf size, so it is absorbed into low-target strip neighbors and stays
  silent.  The strips themselves are sized to survive intact only when no
  rows are removed: any strategy that both amplifies and removes leaves
  orphaned strip remnants that fuse into flipped site leaves as false
  positives.
* Regime B (high rare share) rewards plain under-sampling.  Two large
  sites alternate rare rows with equally many low-target decoys, so every
  window's mean stays silent until decoys are thinned; removal (or
  amplification) flips them.  Amplifiers are then punished twice: rare
  singletons scattered through the bulk flip their bulk neighborhoods into
  false positives once copied, and near-threshold rings beside the sites
  flip when they are simultaneously thinned and hit by noise-dispersed
  copies, which is exactly the Gaussian-family signature.

Placement levels are solved per dataset from the realized target sample
(median, upper whisker, and the relevance-threshold crossing), iterated to
a fixed point, so the planted margins survive quartile wobble.

Each dataset has one informative feature plus two noise features.
"""

from __future__ import annotations

import numpy as np

from .dataset import Dataset, derive_seed
from .relevance import boxplot_control_points, fit_relevance, phi

REGIME_A = "A"
REGIME_B = "B"

#: Rare-percentage boundary separating the regimes (A below, B above).
REGIME_P_RARE_SPLIT = 14.0

#: The resampler each regime is constructed to favor.
REGIME_BEST_RESAMPLER = {REGIME_A: "RO", REGIME_B: "RU"}

#: Scale of the informative axis.  Gaussian-noise strategies jitter copies
#: by 0.05 * sd(axis) ~ 0.07 * SCALE, far wider than a site (0.004 * SCALE)
#: but far narrower than the gaps between structures.
_SCALE = 5.0


def _threshold_geometry(y: np.ndarray, t_r: float = 0.8) -> tuple[float, float, float]:
    """(median, upper relevance-threshold crossing, upper whisker) of a sample.

    The crossing is the smallest target value whose relevance reaches t_r,
    found by bisection between the median and the upper control point.
    """
    points = boxplot_control_points(y)
    f = fit_relevance(points)
    med, adj_h = points[1].y, points[2].y
    lo, hi = med, adj_h
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if phi(f, mid) >= t_r:
            hi = mid
        else:
            lo = mid
    return med, hi, adj_h


def _assemble(
    name: str, rng: np.random.Generator, x0: np.ndarray, y: np.ndarray
) -> Dataset:
    n = len(y)
    noise = rng.random((n, 2))
    order = rng.permutation(n)
    features = np.column_stack([x0, noise])[order]
    return Dataset(
        name=name,
        features=features,
        target=y[order],
        feature_names=("x0", "x1", "x2"),
    )


def make_regime_a(name: str, n: int, seed: int) -> Dataset:
    """Replication-favoring dataset (see module docstring)."""
    rng = np.random.default_rng(seed)
    n_sites = 7
    rares_per_site = 3
    twins_per_site = 2
    strip_size = 8
    n_strips = n_sites + 1
    n_special = n_sites * (rares_per_site + twins_per_site) + n_strips * strip_size
    n_bulk = n - n_special

    x_bulk = rng.uniform(0.0, 0.55, n_bulk) * _SCALE
    y_bulk = 1.2 + 1.2 * (x_bulk / _SCALE) + rng.normal(0.0, 0.06, n_bulk)

    # Alternate strips and sites across the upper part of the axis:
    # [strip site strip site ... strip], separated by empty gaps.
    site_centers = (0.64 + 0.045 * np.arange(n_sites)) * _SCALE
    strip_centers = (0.6175 + 0.045 * np.arange(n_strips)) * _SCALE
    site_span = 0.004 * _SCALE
    strip_span = 0.006 * _SCALE

    rare_eps = rng.normal(0.0, 1.0, (n_sites, rares_per_site))
    twin_eps = rng.normal(0.0, 1.0, (n_sites, twins_per_site))
    strip_u = rng.uniform(-1.0, 1.0, (n_strips, strip_size))

    y_rare, y_twin, y_strip_mid = 2.6, 1.0, 1.2
    for _ in range(4):
        y_sites_r = y_rare + 0.02 * rare_eps
        y_sites_t = y_twin + 0.02 * twin_eps
        y_strips = y_strip_mid + 0.10 * strip_u
        target = np.concatenate(
            [y_bulk, y_sites_r.ravel(), y_sites_t.ravel(), y_strips.ravel()]
        )
        med, y_star, adj_h = _threshold_geometry(target)
        s = adj_h - med
        y_rare = med + 1.50 * s
        y_twin = med - 0.65 * s
        y_strip_mid = med - 0.45 * s

    # Within a site, rares and twins interleave: r t r t r.
    offsets = np.linspace(-site_span, site_span, 5)
    x_sites = site_centers[:, None] + offsets[None, :]
    x_rares = x_sites[:, [0, 2, 4]]
    x_twins = x_sites[:, [1, 3]]
    x_strips = strip_centers[:, None] + strip_u * strip_span

    x0 = np.concatenate(
        [x_bulk, x_rares.ravel(), x_twins.ravel(), x_strips.ravel()]
    )
    y = np.concatenate([y_bulk, y_sites_r.ravel(), y_sites_t.ravel(), y_strips.ravel()])
    return _assemble(name, rng, x0, y)


def make_regime_b(name: str, n: int, seed: int) -> Dataset:
    """Under-sampling-favoring dataset (see module docstring)."""
    rng = np.random.default_rng(seed)
    n_sites = 2
    pairs_per_site = 12
    ring_size = 10
    n_scattered = 8
    n_special = n_sites * 2 * pairs_per_site + 2 * n_sites * ring_size + n_scattered
    n_bulk = n - n_special

    x_bulk = rng.uniform(0.0, 0.62, n_bulk) * _SCALE
    y_bulk = 1.2 + 1.2 * (x_bulk / _SCALE) + rng.normal(0.0, 0.06, n_bulk)

    site_centers = np.array([0.75, 0.90]) * _SCALE
    site_span = 0.012 * _SCALE
    ring_offset = 0.03 * _SCALE
    ring_span = 0.008 * _SCALE

    rare_eps = rng.normal(0.0, 1.0, (n_sites, pairs_per_site))
    decoy_eps = rng.normal(0.0, 1.0, (n_sites, pairs_per_site))
    ring_u = rng.uniform(-1.0, 1.0, (2 * n_sites, ring_size))
    ring_eps = rng.normal(0.0, 1.0, (2 * n_sites, ring_size))
    x_scat = rng.uniform(0.08, 0.55, n_scattered) * _SCALE
    scat_eps = rng.normal(0.0, 1.0, n_scattered)

    y_rare, y_decoy, y_ring, y_scat = 2.8, 1.2, 2.1, 3.4
    for _ in range(4):
        target = np.concatenate(
            [
                y_bulk,
                (y_rare + 0.02 * rare_eps).ravel(),
                (y_decoy + 0.03 * decoy_eps).ravel(),
                (y_ring + 0.02 * ring_eps).ravel(),
                y_scat + 0.03 * scat_eps,
            ]
        )
        med, y_star, adj_h = _threshold_geometry(target)
        s = adj_h - med
        y_rare = med + 1.15 * s
        y_decoy = med - 0.30 * s
        y_ring = med + 0.60 * s
        # Scattered singletons: one rare among four bulk rows stays silent,
        # two rares among three bulk rows flip.
        local = 1.2 + 1.2 * (x_scat / _SCALE)
        b_lo = float(local.min()) - 0.08
        b_hi = float(local.max()) + 0.08
        lo_req = ((y_star + 0.04 * s) * 5.0 - 3.0 * b_lo) / 2.0
        hi_req = (y_star - 0.04 * s) * 5.0 - 4.0 * b_hi
        y_scat = max(lo_req, min(hi_req, 0.5 * (lo_req + hi_req)))
        if hi_req > lo_req:
            y_scat = 0.5 * (lo_req + hi_req)

    # Within a site, rares and decoys alternate strictly along the axis.
    pair_slots = np.linspace(-site_span, site_span, 2 * pairs_per_site)
    x_rares = site_centers[:, None] + pair_slots[None, 0::2]
    x_decoys = site_centers[:, None] + pair_slots[None, 1::2]
    ring_centers = np.concatenate(
        [site_centers - ring_offset, site_centers + ring_offset]
    )
    x_rings = ring_centers[:, None] + ring_u * ring_span

    x0 = np.concatenate(
        [x_bulk, x_rares.ravel(), x_decoys.ravel(), x_rings.ravel(), x_scat]
    )
    y = np.concatenate(
        [
            y_bulk,
            (y_rare + 0.02 * rare_eps).ravel(),
            (y_decoy + 0.03 * decoy_eps).ravel(),
            (y_ring + 0.02 * ring_eps).ravel(),
            y_scat + 0.03 * scat_eps,
        ]
    )
    return _assemble(name, rng, x0, y)


def make_two_regime_corpus(
    n_datasets: int = 60, master_seed: int = 0
) -> tuple[list[Dataset], dict[str, str]]:
    """Generate the planted corpus: half regime A, half regime B.

    Returns the datasets plus a map from dataset name to its regime.  Sizes
    are drawn from one overlapping range so that only the rare percentage
    separates the regimes.
    """
    datasets: list[Dataset] = []
    regimes: dict[str, str] = {}
    half = n_datasets // 2
    for i in range(n_datasets):
        regime = REGIME_A if i < half else REGIME_B
        name = f"syn{regime}{i:03d}"
        seed = derive_seed(master_seed, ["synthetic", name])
        rng = np.random.default_rng(seed)
        n = int(rng.integers(150, 200))
        maker = make_regime_a if regime == REGIME_A else make_regime_b
        datasets.append(maker(name, n, derive_seed(seed, ["draw"])))
        regimes[name] = regime
    return datasets, regimes


def make_tail_dataset(name: str = "tail", n: int = 200, seed: int = 0) -> Dataset:
    """Simple dataset with a clear rare upper tail, for strategy tests."""
    rng = np.random.default_rng(seed)
    n_tail = max(4, n // 12)
    x = rng.random((n, 3))
    y = 2.0 + x[:, 0] + rng.normal(0.0, 0.1, n)
    idx = rng.choice(n, size=n_tail, replace=False)
    y[idx] = 8.0 + rng.normal(0.0, 0.2, n_tail)
    return Dataset(name=name, features=x, target=y, feature_names=("a", "b", "c"))
