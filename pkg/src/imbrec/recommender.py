"""Pipeline recommendation: grid evaluation, meta-training, and LODO.

A pipeline pairs a resampling strategy with a learner.  For each training
dataset, every registered pipeline is scored on a seeded holdout; the best
pair becomes that dataset's label row in the meta-dataset.  Two classifiers
are then trained over the meta-features, either independently or chained
(one classifier's own predictions widen the other's inputs), and recommend
pipelines for new datasets from their meta-features alone: recommendation
never trains or scores a candidate pipeline.

All seeds derive from dataset/strategy/learner names, so results do not
depend on corpus order or worker scheduling.
"""

from __future__ import annotations

import json
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import learners as L
from . import metrics as M
from . import resampling as R
from .dataset import Dataset, derive_seed, split_holdout
from .meta_features import META_FEATURE_NAMES, MetaFeatureVector, extract
from .relevance import relevance_for

logger = logging.getLogger(__name__)

APPROACH_INDEPENDENT = "Independent"
APPROACH_MODEL_FIRST = "ModelFirst"
APPROACH_STRATEGY_FIRST = "StrategyFirst"
APPROACHES = (APPROACH_INDEPENDENT, APPROACH_MODEL_FIRST, APPROACH_STRATEGY_FIRST)

DEFAULT_TEST_FRACTION = 0.25

_BUNDLE_FORMAT = "imbrec-bundle"
_BUNDLE_VERSION = 1


@dataclass(frozen=True)
class Pipeline:
    """One (resampling strategy, learner) pair."""

    resampler: str
    learner: str

    def __post_init__(self) -> None:
        if self.resampler not in R.RESAMPLER_KINDS:
            raise ValueError(f"unknown resampler {self.resampler!r}")
        if self.learner not in L.REGRESSOR_KINDS:
            raise ValueError(f"unknown learner {self.learner!r}")


@dataclass(frozen=True)
class MetaRow:
    """One meta-dataset row: a dataset's features, labels, and score grid."""

    dataset: str
    features: np.ndarray
    best_learner: str
    best_resampler: str
    scores: dict[tuple[str, str], float]  # (learner, resampler) -> score


@dataclass(frozen=True)
class MetaDataset:
    """Meta-feature rows with oracle-best labels over fixed registries."""

    rows: tuple[MetaRow, ...]
    learners: tuple[str, ...]
    resamplers: tuple[str, ...]
    metric: str
    feature_names: tuple[str, ...] = META_FEATURE_NAMES

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "learners", tuple(sorted(self.learners)))
        object.__setattr__(self, "resamplers", tuple(sorted(self.resamplers)))

    def feature_matrix(self) -> np.ndarray:
        return np.vstack([r.features for r in self.rows])

    def labels(self) -> tuple[list[str], list[str]]:
        return (
            [r.best_learner for r in self.rows],
            [r.best_resampler for r in self.rows],
        )

    def without(self, dataset_name: str) -> "MetaDataset":
        kept = tuple(r for r in self.rows if r.dataset != dataset_name)
        if len(kept) == len(self.rows):
            raise KeyError(f"no row for dataset {dataset_name!r}")
        return MetaDataset(kept, self.learners, self.resamplers, self.metric)


@dataclass
class MetaModelBundle:
    """The two trained meta-classifiers plus their wiring.

    For chained approaches, the second classifier consumes the base
    meta-features widened by a one-hot encoding of the first classifier's
    prediction; ``learner_classes``/``resampler_classes`` fix that encoding.
    """

    lambda_l: L.TrainedModel
    lambda_r: L.TrainedModel
    approach: str
    metric: str
    learner_classes: tuple[str, ...]
    resampler_classes: tuple[str, ...]
    feature_names: tuple[str, ...] = META_FEATURE_NAMES

    @property
    def base_width(self) -> int:
        return len(self.feature_names)


def _one_hot(labels, classes: tuple[str, ...]) -> np.ndarray:
    out = np.zeros((len(labels), len(classes)))
    index = {c: i for i, c in enumerate(classes)}
    for i, lab in enumerate(labels):
        out[i, index[str(lab)]] = 1.0
    return out


def _scores_for_predictions(
    y_true: np.ndarray, y_pred: np.ndarray, f, t_r: float
) -> dict[str, float]:
    return {
        M.METRIC_F1R: M.f1_score_r(y_true, y_pred, f, t_r),
        M.METRIC_SERA: M.sera(y_true, y_pred, f),
    }


def evaluate_pipeline_all_metrics(
    d: Dataset,
    p: Pipeline,
    t_r: float = 0.8,
    seed: int = 0,
    test_fraction: float = DEFAULT_TEST_FRACTION,
    resampler_params: dict[str, dict] | None = None,
    learner_specs: dict[str, L.LearnerSpec] | None = None,
) -> dict[str, float]:
    """Run one pipeline on a seeded holdout and score it under both metrics.

    The split depends only on ``seed``, so every pipeline evaluated on the
    same dataset sees the same holdout.  Relevance for resampling is fitted
    on the training targets; the metrics use a relevance function fitted on
    the full original target.  A strategy whose preconditions fail yields
    the worst-possible sentinel for each metric.
    """
    split = split_holdout(d, test_fraction, derive_seed(seed, ["split"]))
    f_full = relevance_for(d)
    # Parameter validation stays outside the sentinel path: a bad spec is a
    # configuration error, not a degenerate dataset.
    spec = R.ResamplingSpec(
        kind=p.resampler,
        t_r=t_r,
        params=(resampler_params or {}).get(p.resampler, {}),
        seed=derive_seed(seed, [p.learner, p.resampler, "resample"]),
    )
    if learner_specs and p.learner in learner_specs:
        base = learner_specs[p.learner]
    else:
        base = L.default_spec(p.learner)
    lspec = L.LearnerSpec(
        kind=base.kind,
        n_trees=base.n_trees,
        max_depth=base.max_depth,
        min_leaf=base.min_leaf,
        feature_subsample=base.feature_subsample,
        learning_rate=base.learning_rate,
        seed=derive_seed(seed, [p.learner, p.resampler, "fit"]),
    )
    try:
        f_train = relevance_for(split.train)
        resampled = R.apply(spec, split.train, f_train)
    except (R.ResamplingError, ValueError) as exc:
        logger.warning("pipeline (%s, %s) failed on %s: %s", p.learner, p.resampler, d.name, exc)
        return dict(M.SENTINEL_SCORE)
    model = L.fit_regressor(lspec, resampled)
    preds = L.predict(model, split.test.features)
    return _scores_for_predictions(split.test.target, preds, f_full, t_r)


def evaluate_pipeline(
    d: Dataset,
    p: Pipeline,
    metric: str,
    t_r: float = 0.8,
    seed: int = 0,
    test_fraction: float = DEFAULT_TEST_FRACTION,
    resampler_params: dict[str, dict] | None = None,
    learner_specs: dict[str, L.LearnerSpec] | None = None,
) -> float:
    """Score of one pipeline under one metric (see the all-metrics variant)."""
    if metric not in M.METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    return evaluate_pipeline_all_metrics(
        d, p, t_r, seed, test_fraction, resampler_params, learner_specs
    )[metric]


def _grid_for_dataset(
    d: Dataset,
    learner_kinds: tuple[str, ...],
    resampler_kinds: tuple[str, ...],
    t_r: float,
    master_seed: int,
    test_fraction: float,
    resampler_params: dict[str, dict] | None,
    learner_specs: dict[str, L.LearnerSpec] | None,
) -> dict[tuple[str, str], dict[str, float]]:
    """Both-metric scores of every registered pipeline on one dataset."""
    seed = derive_seed(master_seed, ["grid", d.name])
    grid: dict[tuple[str, str], dict[str, float]] = {}
    for lk in sorted(learner_kinds):
        for rk in sorted(resampler_kinds):
            grid[(lk, rk)] = evaluate_pipeline_all_metrics(
                d,
                Pipeline(resampler=rk, learner=lk),
                t_r,
                seed,
                test_fraction,
                resampler_params,
                learner_specs,
            )
    return grid


def best_pipeline_of_grid(scores: dict[tuple[str, str], float], metric: str) -> Pipeline:
    """Argmax (F1R) or argmin (SERA) cell; ties go to the lexicographically
    first (learner, resampler) pair."""
    maximize = M.higher_is_better(metric)
    best_key: tuple[str, str] | None = None
    best_score = None
    for key in sorted(scores):
        s = scores[key]
        if best_key is None or (s > best_score if maximize else s < best_score):
            best_key, best_score = key, s
    return Pipeline(resampler=best_key[1], learner=best_key[0])


def _meta_row_for_dataset(args) -> tuple[str, MetaRow | None, str | None]:
    """Worker task: one dataset's meta-features plus its oracle labels."""
    (d, learner_kinds, resampler_kinds, metric, t_r, master_seed, test_fraction,
     resampler_params, learner_specs) = args
    try:
        f_full = relevance_for(d)
        features = extract(d, f_full, t_r)
        grid = _grid_for_dataset(
            d, learner_kinds, resampler_kinds, t_r, master_seed, test_fraction,
            resampler_params, learner_specs,
        )
        chosen = {key: vals[metric] for key, vals in grid.items()}
        best = best_pipeline_of_grid(chosen, metric)
        row = MetaRow(
            dataset=d.name,
            features=features.values,
            best_learner=best.learner,
            best_resampler=best.resampler,
            scores=chosen,
        )
        return d.name, row, None
    except Exception as exc:  # noqa: BLE001 - skip the dataset, keep the corpus
        return d.name, None, str(exc)


def build_meta_dataset(
    corpus: list[Dataset],
    learner_kinds: tuple[str, ...] = L.REGRESSOR_KINDS,
    resampler_kinds: tuple[str, ...] = R.RESAMPLER_KINDS,
    metric: str = M.METRIC_F1R,
    t_r: float = 0.8,
    master_seed: int = 0,
    test_fraction: float = DEFAULT_TEST_FRACTION,
    workers: int = 1,
    resampler_params: dict[str, dict] | None = None,
    learner_specs: dict[str, L.LearnerSpec] | None = None,
) -> MetaDataset:
    """Evaluate the full pipeline grid per dataset and assemble the rows.

    Datasets are processed independently (optionally in parallel) and the
    rows assembled in dataset-name order.  A dataset whose grid or feature
    extraction fails is skipped with a logged reason; an all-failure corpus
    raises.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    if not learner_kinds or not resampler_kinds:
        raise ValueError("learner and resampler registries must be nonempty")
    if metric not in M.METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    names = [d.name for d in corpus]
    if len(set(names)) != len(names):
        raise ValueError("corpus dataset names must be unique")

    ordered = sorted(corpus, key=lambda d: d.name)
    tasks = [
        (d, tuple(learner_kinds), tuple(resampler_kinds), metric, t_r, master_seed,
         test_fraction, resampler_params, learner_specs)
        for d in ordered
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_meta_row_for_dataset, tasks))
    else:
        results = [_meta_row_for_dataset(t) for t in tasks]

    rows = []
    for name, row, err in results:
        if row is None:
            logger.warning("skipping dataset %s: %s", name, err)
        else:
            rows.append(row)
    if not rows:
        raise ValueError("every dataset in the corpus failed")
    return MetaDataset(
        rows=tuple(rows),
        learners=tuple(sorted(learner_kinds)),
        resamplers=tuple(sorted(resampler_kinds)),
        metric=metric,
    )


def train_meta(
    meta: MetaDataset,
    approach: str = APPROACH_INDEPENDENT,
    meta_spec: L.LearnerSpec | None = None,
    seed: int = 0,
) -> MetaModelBundle:
    """Train the learner- and resampler-classifiers under one approach.

    Independent fits both on the base features.  ModelFirst widens the
    resampler-classifier's inputs with a one-hot of the learner-classifier's
    own training-set predictions; StrategyFirst is symmetric.
    """
    if approach not in APPROACHES:
        raise ValueError(f"unknown approach {approach!r}; expected one of {APPROACHES}")
    if len(meta.rows) < 2:
        raise ValueError("meta-dataset needs at least 2 rows")
    base = meta_spec if meta_spec is not None else L.default_spec(L.KIND_RF_CLF)

    def spec_with(label: str) -> L.LearnerSpec:
        return L.LearnerSpec(
            kind=base.kind,
            n_trees=base.n_trees,
            max_depth=base.max_depth,
            min_leaf=base.min_leaf,
            feature_subsample=base.feature_subsample,
            learning_rate=base.learning_rate,
            seed=derive_seed(seed, [label]),
        )

    x = meta.feature_matrix()
    y_l, y_r = meta.labels()

    if approach == APPROACH_INDEPENDENT:
        lambda_l = L.fit_classifier(spec_with("lambda-L"), x, y_l)
        lambda_r = L.fit_classifier(spec_with("lambda-R"), x, y_r)
    elif approach == APPROACH_MODEL_FIRST:
        lambda_l = L.fit_classifier(spec_with("lambda-L"), x, y_l)
        widened = np.hstack([x, _one_hot(L.predict(lambda_l, x), meta.learners)])
        lambda_r = L.fit_classifier(spec_with("lambda-R"), widened, y_r)
    else:
        lambda_r = L.fit_classifier(spec_with("lambda-R"), x, y_r)
        widened = np.hstack([x, _one_hot(L.predict(lambda_r, x), meta.resamplers)])
        lambda_l = L.fit_classifier(spec_with("lambda-L"), widened, y_l)

    return MetaModelBundle(
        lambda_l=lambda_l,
        lambda_r=lambda_r,
        approach=approach,
        metric=meta.metric,
        learner_classes=meta.learners,
        resampler_classes=meta.resamplers,
    )


def recommend_from_features(bundle: MetaModelBundle, features: np.ndarray) -> Pipeline:
    """Pipeline prediction from an already-extracted meta-feature vector."""
    x = np.asarray(features, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != bundle.base_width:
        raise ValueError(
            f"expected {bundle.base_width} meta-features, got {x.shape[1]}"
        )
    if bundle.approach == APPROACH_INDEPENDENT:
        l_star = str(L.predict(bundle.lambda_l, x)[0])
        r_star = str(L.predict(bundle.lambda_r, x)[0])
    elif bundle.approach == APPROACH_MODEL_FIRST:
        l_star = str(L.predict(bundle.lambda_l, x)[0])
        widened = np.hstack([x, _one_hot([l_star], bundle.learner_classes)])
        r_star = str(L.predict(bundle.lambda_r, widened)[0])
    else:
        r_star = str(L.predict(bundle.lambda_r, x)[0])
        widened = np.hstack([x, _one_hot([r_star], bundle.resampler_classes)])
        l_star = str(L.predict(bundle.lambda_l, widened)[0])
    return Pipeline(resampler=r_star, learner=l_star)


def recommend(g: Dataset, bundle: MetaModelBundle, t_r: float = 0.8) -> Pipeline:
    """Zero-shot pipeline recommendation for a new dataset.

    Extracts the dataset's meta-features and applies the trained
    classifiers; no candidate pipeline is trained or evaluated.
    """
    features = extract(g, relevance_for(g), t_r)
    return recommend_from_features(bundle, features.values)


BASELINE_RANDOM = "Random"
BASELINE_MAJORITY = "Majority"


def baseline_recommend(kind: str, meta: MetaDataset, seed: int = 0) -> Pipeline:
    """Non-learning reference recommenders.

    Random draws uniformly from the registries; Majority returns the modal
    labels of the meta-dataset (ties to the lexicographically smallest).
    """
    if not meta.rows:
        raise ValueError("meta-dataset is empty")
    if kind == BASELINE_RANDOM:
        rng = np.random.default_rng(seed)
        return Pipeline(
            learner=meta.learners[rng.integers(0, len(meta.learners))],
            resampler=meta.resamplers[rng.integers(0, len(meta.resamplers))],
        )
    if kind == BASELINE_MAJORITY:
        y_l, y_r = meta.labels()

        def modal(values: list[str]) -> str:
            counts = Counter(values)
            top = max(counts.values())
            return min(c for c, k in counts.items() if k == top)

        return Pipeline(learner=modal(y_l), resampler=modal(y_r))
    raise ValueError(f"unknown baseline {kind!r}")


def win_tie_loss(
    scores_a, scores_b, higher_is_better: bool = True
) -> tuple[int, int, int]:
    """Elementwise (wins, ties, losses) of A against B, exact-equality ties."""
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if higher_is_better:
        wins = int(np.sum(a > b))
        losses = int(np.sum(a < b))
    else:
        wins = int(np.sum(a < b))
        losses = int(np.sum(a > b))
    ties = a.size - wins - losses
    return wins, ties, losses


@dataclass(frozen=True)
class LodoRecord:
    """One leave-one-dataset-out round."""

    dataset: str
    oracle_learner: str
    oracle_resampler: str
    predicted_learner: str
    predicted_resampler: str
    random_learner: str
    random_resampler: str
    majority_learner: str
    majority_resampler: str
    score_recommended: float
    score_oracle: float
    score_random: float
    score_majority: float


@dataclass(frozen=True)
class LodoReport:
    """Per-dataset LODO rounds plus meta- and base-level summaries."""

    metric: str
    approach: str
    records: tuple[LodoRecord, ...]
    meta: MetaDataset
    summary: dict[str, float] = field(default_factory=dict)

    def per_method_scores(self) -> dict[str, np.ndarray]:
        return {
            "meta_ir": np.array([r.score_recommended for r in self.records]),
            "oracle": np.array([r.score_oracle for r in self.records]),
            "random": np.array([r.score_random for r in self.records]),
            "majority": np.array([r.score_majority for r in self.records]),
        }


def _summarize_lodo(records: list[LodoRecord], meta: MetaDataset, metric: str) -> dict:
    true_l = [r.oracle_learner for r in records]
    true_r = [r.oracle_resampler for r in records]
    pred_l = [r.predicted_learner for r in records]
    pred_r = [r.predicted_resampler for r in records]
    rand_l = [r.random_learner for r in records]
    rand_r = [r.random_resampler for r in records]
    maj_l = [r.majority_learner for r in records]
    maj_r = [r.majority_resampler for r in records]
    out = {
        "accuracy_learner": M.accuracy(true_l, pred_l),
        "accuracy_resampler": M.accuracy(true_r, pred_r),
        "f1_macro_learner": M.f1_macro(true_l, pred_l),
        "f1_macro_resampler": M.f1_macro(true_r, pred_r),
        "f1_macro_learner_random": M.f1_macro(true_l, rand_l),
        "f1_macro_resampler_random": M.f1_macro(true_r, rand_r),
        "f1_macro_learner_majority": M.f1_macro(true_l, maj_l),
        "f1_macro_resampler_majority": M.f1_macro(true_r, maj_r),
        "mean_score_meta_ir": float(np.mean([r.score_recommended for r in records])),
        "mean_score_oracle": float(np.mean([r.score_oracle for r in records])),
        "mean_score_random": float(np.mean([r.score_random for r in records])),
        "mean_score_majority": float(np.mean([r.score_majority for r in records])),
    }
    return out


def lodo_evaluate(
    corpus: list[Dataset],
    learner_kinds: tuple[str, ...] = L.REGRESSOR_KINDS,
    resampler_kinds: tuple[str, ...] = R.RESAMPLER_KINDS,
    metric: str = M.METRIC_F1R,
    approach: str = APPROACH_INDEPENDENT,
    master_seed: int = 0,
    t_r: float = 0.8,
    test_fraction: float = DEFAULT_TEST_FRACTION,
    workers: int = 1,
    meta_spec: L.LearnerSpec | None = None,
    resampler_params: dict[str, dict] | None = None,
    learner_specs: dict[str, L.LearnerSpec] | None = None,
    meta: MetaDataset | None = None,
) -> LodoReport:
    """Leave-one-dataset-out evaluation of the recommender.

    Each round trains meta-classifiers on every other dataset's row and
    recommends for the held-out one; the recommended pipeline's stored grid
    score is the base-level result (grid seeds depend only on names, so it
    equals a fresh evaluation).  Random and Majority baselines and the
    oracle-best pipeline are scored the same way.  A prebuilt meta-dataset
    may be passed to reuse grid work.
    """
    if len(corpus) < 3:
        raise ValueError("leave-one-dataset-out needs at least 3 datasets")
    if meta is None:
        meta = build_meta_dataset(
            corpus, learner_kinds, resampler_kinds, metric, t_r, master_seed,
            test_fraction, workers, resampler_params, learner_specs,
        )
    records: list[LodoRecord] = []
    for row in meta.rows:
        rest = meta.without(row.dataset)
        bundle = train_meta(
            rest, approach, meta_spec, seed=derive_seed(master_seed, ["meta", row.dataset])
        )
        rec = recommend_from_features(bundle, row.features)
        rand = baseline_recommend(
            BASELINE_RANDOM, rest, seed=derive_seed(master_seed, ["random", row.dataset])
        )
        maj = baseline_recommend(BASELINE_MAJORITY, rest)
        records.append(
            LodoRecord(
                dataset=row.dataset,
                oracle_learner=row.best_learner,
                oracle_resampler=row.best_resampler,
                predicted_learner=rec.learner,
                predicted_resampler=rec.resampler,
                random_learner=rand.learner,
                random_resampler=rand.resampler,
                majority_learner=maj.learner,
                majority_resampler=maj.resampler,
                score_recommended=row.scores[(rec.learner, rec.resampler)],
                score_oracle=row.scores[(row.best_learner, row.best_resampler)],
                score_random=row.scores[(rand.learner, rand.resampler)],
                score_majority=row.scores[(maj.learner, maj.resampler)],
            )
        )
    return LodoReport(
        metric=metric,
        approach=approach,
        records=tuple(records),
        meta=meta,
        summary=_summarize_lodo(records, meta, metric),
    )


def bundle_to_dict(bundle: MetaModelBundle) -> dict:
    return {
        "format": _BUNDLE_FORMAT,
        "version": _BUNDLE_VERSION,
        "approach": bundle.approach,
        "metric": bundle.metric,
        "learner_classes": list(bundle.learner_classes),
        "resampler_classes": list(bundle.resampler_classes),
        "feature_names": list(bundle.feature_names),
        "lambda_l": L.model_to_dict(bundle.lambda_l),
        "lambda_r": L.model_to_dict(bundle.lambda_r),
    }


def bundle_from_dict(data: dict) -> MetaModelBundle:
    if data.get("format") != _BUNDLE_FORMAT:
        raise ValueError("not a serialized recommender bundle")
    if data.get("version") != _BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version {data.get('version')}")
    return MetaModelBundle(
        lambda_l=L.model_from_dict(data["lambda_l"]),
        lambda_r=L.model_from_dict(data["lambda_r"]),
        approach=data["approach"],
        metric=data["metric"],
        learner_classes=tuple(data["learner_classes"]),
        resampler_classes=tuple(data["resampler_classes"]),
        feature_names=tuple(data["feature_names"]),
    )


def save_bundle(bundle: MetaModelBundle, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle_to_dict(bundle), fh)


def load_bundle(path: str | os.PathLike) -> MetaModelBundle:
    with open(path, "r", encoding="utf-8") as fh:
        return bundle_from_dict(json.load(fh))
