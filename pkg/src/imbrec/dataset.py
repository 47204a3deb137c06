"""Dataset container, CSV ingestion, deterministic splitting and seed derivation.

Every random decision in the library flows from one master seed through
:func:`derive_seed`, keyed on stable text labels (dataset names, strategy
names) rather than positions, so experiments are reproducible and
order-independent.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Cell values treated as missing during ingestion (case-insensitive).
MISSING_TOKENS = frozenset({"", "na", "nan", "n/a", "?", "null", "none"})


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """A named numeric regression dataset.

    ``features`` is an (n, d) float matrix and ``target`` a length-n vector;
    both are read-only after construction so instances can be shared freely
    across workers.  ``categorical`` lists the column indices that were
    integer-encoded from text during ingestion (empty when unknown).
    Datasets produced by :func:`ingest_csv` additionally guarantee n >= 2,
    no missing values, and a non-constant target.
    """

    name: str
    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]
    categorical: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        feats = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        targ = np.asarray(self.target, dtype=np.float64).ravel()
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if feats.shape[0] != targ.shape[0]:
            raise ValueError(
                f"features has {feats.shape[0]} rows but target has {targ.shape[0]}"
            )
        if feats.shape[0] < 1:
            raise ValueError("dataset must contain at least one row")
        if feats.shape[1] < 1:
            raise ValueError("dataset must contain at least one feature")
        if len(self.feature_names) != feats.shape[1]:
            raise ValueError("feature_names length does not match feature count")
        if not np.isfinite(feats).all() or not np.isfinite(targ).all():
            raise ValueError("features and target must be finite (no NaN/inf)")
        if any(c < 0 or c >= feats.shape[1] for c in self.categorical):
            raise ValueError("categorical column index out of range")
        object.__setattr__(self, "features", _freeze(feats))
        object.__setattr__(self, "target", _freeze(targ))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "categorical", tuple(sorted(self.categorical)))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, indices: np.ndarray, name: str | None = None) -> "Dataset":
        """Row subset with the same schema."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(
            name=self.name if name is None else name,
            features=self.features[idx],
            target=self.target[idx],
            feature_names=self.feature_names,
            categorical=self.categorical,
        )

    def with_rows(
        self, features: np.ndarray, target: np.ndarray, name: str | None = None
    ) -> "Dataset":
        """New dataset with different rows but this dataset's schema."""
        return Dataset(
            name=self.name if name is None else name,
            features=features,
            target=target,
            feature_names=self.feature_names,
            categorical=self.categorical,
        )


@dataclass(frozen=True)
class SplitPair:
    """A row-disjoint train/test partition of one dataset."""

    train: Dataset
    test: Dataset
    seed: int

    def __post_init__(self) -> None:
        if self.train.n < 1 or self.test.n < 1:
            raise ValueError("both sides of a split must be nonempty")


def derive_seed(master: int, labels: Sequence[str]) -> int:
    """Derive a 64-bit unsigned seed from a master seed and ordered labels.

    Stable across runs and platforms; distinct label lists collide only with
    negligible probability.  Labels are length-prefixed before hashing so
    ``["ab", "c"]`` and ``["a", "bc"]`` differ.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master)).encode("ascii"))
    for label in labels:
        raw = str(label).encode("utf-8")
        h.update(len(raw).to_bytes(4, "little"))
        h.update(raw)
    return int.from_bytes(h.digest(), "little")


def ceil_count(n: int, fraction: float) -> int:
    """``ceil(n * fraction)`` guarded against binary-float fuzz (0.3*10 -> 3)."""
    return max(0, math.ceil(n * fraction - 1e-9))


def split_holdout(d: Dataset, test_fraction: float, seed: int) -> SplitPair:
    """Deterministic shuffled holdout split.

    The test side receives ``ceil(n * test_fraction)`` rows chosen by a
    generator seeded with ``seed``; identical inputs give identical splits
    on every platform.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n_test = ceil_count(d.n, test_fraction)
    n_train = d.n - n_test
    if n_test < 1 or n_train < 1:
        raise ValueError(
            f"split of {d.n} rows at fraction {test_fraction} leaves an empty side"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(d.n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return SplitPair(train=d.take(train_idx), test=d.take(test_idx), seed=seed)


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _parse_float(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def ingest_csv(
    path: str | os.PathLike,
    target_column: str | int,
    delimiter: str = ",",
    header: bool = True,
    name: str | None = None,
) -> Dataset:
    """Read a delimited file into a :class:`Dataset`.

    Columns whose non-missing cells all parse as numbers are kept numeric;
    any other column is integer-encoded by first appearance of its values.
    Rows with a missing (or unparseable) target are dropped; missing feature
    cells are imputed with the column median.  The target column may be
    given by name (requires a header) or by zero-based index.
    """
    import csv as _csv

    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            rows = [r for r in _csv.reader(fh, delimiter=delimiter) if r]
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path} is empty")

    if header:
        columns = [c.strip() for c in rows[0]]
        body = rows[1:]
    else:
        columns = [f"x{j}" for j in range(len(rows[0]))]
        body = rows
    n_cols = len(columns)
    if any(len(r) != n_cols for r in body):
        raise ValueError(f"{path} has ragged rows")

    if isinstance(target_column, int) or str(target_column).lstrip("-").isdigit():
        t_idx = int(target_column)
        if not -n_cols <= t_idx < n_cols:
            raise ValueError(f"target column index {target_column} out of range")
        t_idx %= n_cols
    else:
        if not header:
            raise ValueError("target column by name requires a header row")
        if target_column not in columns:
            raise ValueError(f"target column {target_column!r} not found in {columns}")
        t_idx = columns.index(str(target_column))
    if n_cols < 2:
        raise ValueError("need at least one non-target column")

    kept = [r for r in body if _parse_float(r[t_idx]) is not None]
    if len(kept) < 2:
        raise ValueError(f"{path}: fewer than 2 rows with a usable target")
    target = np.array([float(r[t_idx]) for r in kept])
    if np.ptp(target) == 0.0:
        raise ValueError(f"{path}: constant target")

    feat_idx = [j for j in range(n_cols) if j != t_idx]
    n = len(kept)
    features = np.empty((n, len(feat_idx)))
    categorical: list[int] = []
    for out_j, j in enumerate(feat_idx):
        cells = [r[j] for r in kept]
        present = [c for c in cells if not _is_missing(c)]
        numeric = all(_parse_float(c) is not None for c in present)
        if numeric:
            col = np.array(
                [np.nan if _is_missing(c) else float(c) for c in cells]
            )
        else:
            codes: dict[str, int] = {}
            col = np.empty(n)
            for i, c in enumerate(cells):
                if _is_missing(c):
                    col[i] = np.nan
                else:
                    col[i] = codes.setdefault(c.strip(), len(codes))
            categorical.append(out_j)
        if np.isnan(col).any():
            med = np.nanmedian(col)
            col = np.where(np.isnan(col), 0.0 if np.isnan(med) else med, col)
        features[:, out_j] = col

    return Dataset(
        name=name if name is not None else os.path.splitext(os.path.basename(path))[0],
        features=features,
        target=target,
        feature_names=tuple(columns[j] for j in feat_idx),
        categorical=tuple(categorical),
    )


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    target_column: str


def read_manifest(path: str | os.PathLike) -> list[ManifestEntry]:
    """Parse a corpus manifest: one ``<dataset path>,<target column>`` per line.

    Blank lines and ``#`` comments are skipped; relative dataset paths are
    resolved against the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    entries: list[ManifestEntry] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "," not in line:
                raise ValueError(
                    f"{path}:{lineno}: expected '<path>,<target column>', got {line!r}"
                )
            p, target = line.rsplit(",", 1)
            p = p.strip()
            if not os.path.isabs(p):
                p = os.path.join(base, p)
            entries.append(ManifestEntry(path=p, target_column=target.strip()))
    if not entries:
        raise ValueError(f"manifest {path} lists no datasets")
    return entries


def load_corpus(manifest_path: str | os.PathLike, delimiter: str = ",") -> list[Dataset]:
    """Ingest every dataset listed in a manifest file."""
    return [
        ingest_csv(e.path, e.target_column, delimiter=delimiter)
        for e in read_manifest(manifest_path)
    ]
