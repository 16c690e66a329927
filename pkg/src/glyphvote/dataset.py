"""Labeled image directories, cross-validation and evaluation reports."""

from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from glyphvote.classifier import (
    MlpConfig,
    MlpModel,
    TrainReport,
    init_mlp,
    one_hot,
    predict_confidences,
    train,
)
from glyphvote.config import Protocol, Settings
from glyphvote.constants import CLASSIFIER_ORDER, FAMILY_SIZES, IMAGE_SUFFIXES, FeatureFamily
from glyphvote.ensemble import (
    EnsembleModel,
    FusionMode,
    any_classifier_correct,
    combine_decisions,
    compute_weights,
    rank_top_k,
)
from glyphvote.exceptions import (
    EmptyDataset,
    EmptyTrainingSet,
    GlyphError,
    TooFewSamples,
    UnreadableImage,
)
from glyphvote.features import FeatureBundle, FeatureVector, extract_feature_bundle
from glyphvote.imaging import read_gray_image

log = logging.getLogger(__name__)

MIN_ACCURACY = 0.01


@dataclass(frozen=True)
class LabeledSample:
    """One image of the dataset.

    ``id`` is the POSIX path relative to the dataset root.
    """

    id: str
    label: int
    path: Path
    features: FeatureBundle | None = None

    def with_features(self, features: FeatureBundle) -> LabeledSample:
        return replace(self, features=features)


# ----------------------------------- Loading ----------------------------------- #


def load_dataset(
    root: Path | str, skip_unreadable: bool = False
) -> tuple[list[LabeledSample], list[str]]:
    """Collect ``root/<class>/<image>`` files.

    Classes are the sorted subdirectory names. Every image is decoded once
    so broken files surface here.

    Raises
    ------
    EmptyDataset
        If no readable image exists below ``root``.
    UnreadableImage
        For the first undecodable file, unless ``skip_unreadable`` is set.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset("Dataset root is not a directory", where=str(root))

    labels = sorted(
        d.name for d in root.iterdir() if d.is_dir() and not d.name.startswith(".")
    )
    samples: list[LabeledSample] = []
    skipped = 0
    for label, name in enumerate(labels):
        files = sorted(
            p
            for p in (root / name).iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        for path in files:
            try:
                read_gray_image(path)
            except UnreadableImage as e:
                if not skip_unreadable:
                    raise
                log.warning(f"Skipping {e}")
                skipped += 1
                continue
            sample_id = path.relative_to(root).as_posix()
            samples.append(LabeledSample(sample_id, label, path))

    if not samples:
        raise EmptyDataset("No readable images found", where=str(root))
    log.info(
        f"Loaded {len(samples)} samples of {len(labels)} classes from {root}"
        + (f" ({skipped} skipped)" if skipped else "")
    )
    return samples, labels


def extract_all(
    samples: Sequence[LabeledSample],
    workers: int = 1,
    dump_dir: Path | None = None,
) -> list[LabeledSample]:
    """Attach feature bundles, extracting in a thread pool.

    Results keep the order of ``samples``. Errors name the failing sample.
    """

    def work(sample: LabeledSample) -> LabeledSample:
        if sample.features is not None:
            return sample
        try:
            bundle = extract_feature_bundle(
                read_gray_image(sample.path),
                dump_dir=dump_dir,
                stem=sample.id.replace("/", "__"),
            )
        except GlyphError as e:
            e.where = e.where or sample.id
            raise
        return sample.with_features(bundle)

    if workers <= 1:
        return [work(s) for s in samples]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, samples))


# ----------------------------------- Splitting ----------------------------------- #


class Split(NamedTuple):
    train: tuple[str, ...]
    test: tuple[str, ...]


def _ids_by_class(samples: Sequence[LabeledSample]) -> dict[int, list[str]]:
    by_class: dict[int, list[str]] = defaultdict(list)
    for s in samples:
        by_class[s.label].append(s.id)
    return dict(sorted(by_class.items()))


@dataclass(frozen=True)
class FoldPlan:
    """Three disjoint parts; fold ``i`` tests on part ``i``."""

    parts: tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]
    seed: int

    def splits(self) -> list[Split]:
        out = []
        for i, test in enumerate(self.parts):
            train = tuple(sid for j, p in enumerate(self.parts) if j != i for sid in p)
            out.append(Split(train, test))
        return out


def three_fold_split(samples: Sequence[LabeledSample], seed: int) -> FoldPlan:
    """Stratified assignment of samples to three parts.

    Each class is shuffled with the seeded generator, classes are concatenated
    in label order and positions are dealt round-robin, so every class lands
    evenly (counts differ by at most one) and the part sizes differ by at most
    one overall.

    Raises
    ------
    TooFewSamples
        If a class has fewer than three samples.
    """
    rng = np.random.default_rng(seed)
    order: list[str] = []
    for label, ids in _ids_by_class(samples).items():
        if len(ids) < 3:
            raise TooFewSamples(
                f"Class {label} has {len(ids)} sample(s), three folds need 3"
            )
        order += [ids[i] for i in rng.permutation(len(ids))]
    parts: list[list[str]] = [[], [], []]
    for position, sid in enumerate(order):
        parts[position % 3].append(sid)
    return FoldPlan(parts=(tuple(parts[0]), tuple(parts[1]), tuple(parts[2])), seed=seed)


def holdout_split(
    samples: Sequence[LabeledSample], seed: int, train_fraction: float = 0.68
) -> Split:
    """Stratified fixed-fraction split, 68/32 by default.

    Every class keeps at least one sample on each side.

    Raises
    ------
    TooFewSamples
        If a class has fewer than two samples.
    """
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train: list[str] = []
    test: list[str] = []
    for label, ids in _ids_by_class(samples).items():
        if len(ids) < 2:
            raise TooFewSamples(f"Class {label} has {len(ids)} sample(s), holdout needs 2")
        shuffled = [ids[i] for i in rng.permutation(len(ids))]
        cut = min(max(round(len(ids) * train_fraction), 1), len(ids) - 1)
        train += shuffled[:cut]
        test += shuffled[cut:]
    return Split(tuple(train), tuple(test))


# --------------------------------- Normalization --------------------------------- #


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per family, per dimension min-max scaling fitted on training data."""

    low: dict[FeatureFamily, NDArray[np.float64]]
    high: dict[FeatureFamily, NDArray[np.float64]]

    def transform(self, family: FeatureFamily, values: ArrayLike) -> NDArray[np.float64]:
        """Scale raw values (a vector or rows) into [0, 1].

        Constant training dimensions map to 0, values outside the training
        range are clamped.
        """
        family = FeatureFamily(family)
        lo, hi = self.low[family], self.high[family]
        span = hi - lo
        v = np.asarray(values, dtype=np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            scaled = np.where(span > 0, (v - lo) / np.where(span > 0, span, 1.0), 0.0)
        return np.clip(scaled, 0.0, 1.0)

    def apply(self, bundle: FeatureBundle) -> FeatureBundle:
        return FeatureBundle.from_vectors(
            FeatureVector(v.family, self.transform(v.family, v.values)) for v in bundle
        )

    def to_document(self) -> dict[str, dict[str, list[float]]]:
        return {
            family.value: {
                "low": self.low[family].tolist(),
                "high": self.high[family].tolist(),
            }
            for family in CLASSIFIER_ORDER
        }

    @classmethod
    def from_document(cls, doc: Mapping[str, Mapping[str, Sequence[float]]]) -> Normalizer:
        low, high = {}, {}
        for name, bounds in doc.items():
            family = FeatureFamily(name)
            low[family] = np.asarray(bounds["low"], dtype=np.float64)
            high[family] = np.asarray(bounds["high"], dtype=np.float64)
            if low[family].shape != (FAMILY_SIZES[family],) or np.any(
                high[family] < low[family]
            ):
                raise ValueError(f"Invalid normalizer bounds for {name}")
        return cls(low, high)


def _family_matrix(
    samples: Sequence[LabeledSample], family: FeatureFamily
) -> NDArray[np.float64]:
    rows = []
    for s in samples:
        if s.features is None:
            raise ValueError(f"Sample {s.id} has no extracted features")
        rows.append(s.features[family].values)
    return np.array(rows, dtype=np.float64).reshape(len(rows), FAMILY_SIZES[family])


def fit_normalizer(samples: Sequence[LabeledSample]) -> Normalizer:
    """Column minima and maxima of the raw training features.

    Raises
    ------
    EmptyTrainingSet
        If ``samples`` is empty.
    """
    if not samples:
        raise EmptyTrainingSet("Cannot fit a normalizer without samples")
    low, high = {}, {}
    for family in CLASSIFIER_ORDER:
        matrix = _family_matrix(samples, family)
        low[family] = matrix.min(axis=0)
        high[family] = matrix.max(axis=0)
    return Normalizer(low, high)


def apply_normalizer(normalizer: Normalizer, features: FeatureBundle) -> FeatureBundle:
    return normalizer.apply(features)


# ----------------------------------- Training ----------------------------------- #


def _validation_cut(
    samples: Sequence[LabeledSample], fraction: float, seed: int
) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Shuffle and hold back the last ``fraction`` of the samples."""
    order = np.random.default_rng(seed).permutation(len(samples))
    shuffled = [samples[i] for i in order]
    if len(shuffled) < 2:
        return shuffled, shuffled
    held = min(max(round(len(shuffled) * fraction), 1), len(shuffled) - 1)
    return shuffled[:-held], shuffled[-held:]


def _top1_accuracy(
    model: MlpModel, inputs: NDArray[np.float64], labels: NDArray[np.int64]
) -> float:
    predicted = predict_confidences(model, inputs).argmax(axis=1)
    return 100.0 * float(np.mean(predicted == labels))


def train_ensemble(
    samples: Sequence[LabeledSample],
    labels: Sequence[str],
    settings: Settings,
) -> tuple[EnsembleModel, dict[FeatureFamily, TrainReport]]:
    """Train the four classifiers and derive their fusion weights.

    The normalizer sees all of ``samples``. The networks train on a seeded
    shuffle minus the last ``validation_fraction``, on which each network's
    accuracy ``d_k`` is measured. Accuracies are floored at 0.01% so the
    weights stay defined.

    Raises
    ------
    EmptyTrainingSet
        If ``samples`` is empty.
    """
    if not samples:
        raise EmptyTrainingSet("No training samples")
    normalizer = fit_normalizer(samples)
    fit_part, held_part = _validation_cut(samples, settings.validation_fraction, settings.seed)
    targets = one_hot([s.label for s in fit_part], len(labels))
    held_labels = np.array([s.label for s in held_part])

    def fit(family: FeatureFamily) -> tuple[MlpModel, TrainReport, float]:
        config = MlpConfig(
            input_size=FAMILY_SIZES[family],
            hidden_size=settings.hidden_sizes[family],
            output_size=len(labels),
            learning_rate=settings.learning_rate,
            momentum=settings.momentum,
            max_epochs=settings.epochs,
            seed=settings.seed + CLASSIFIER_ORDER.index(family),
            target_sse=settings.target_sse,
        )
        model = init_mlp(config)
        inputs = normalizer.transform(family, _family_matrix(fit_part, family))
        report = train(model, list(zip(inputs, targets)))
        held = normalizer.transform(family, _family_matrix(held_part, family))
        return model, report, _top1_accuracy(model, held, held_labels)

    with ThreadPoolExecutor(max_workers=len(CLASSIFIER_ORDER)) as pool:
        fitted = dict(zip(CLASSIFIER_ORDER, pool.map(fit, CLASSIFIER_ORDER)))

    accuracies = []
    for family, (_, report, accuracy) in fitted.items():
        log.info(
            f"{family.value}: {report.epochs_run} epochs, SSE {report.final_sse:.4f}, "
            f"validation accuracy {accuracy:.2f}%"
        )
        if accuracy < MIN_ACCURACY:
            log.warning(
                f"{family.value} classified no validation sample correctly, "
                f"using {MIN_ACCURACY}% for its weight"
            )
            accuracy = MIN_ACCURACY
        accuracies.append(accuracy)

    ensemble = EnsembleModel(
        models={family: fitted[family][0] for family in CLASSIFIER_ORDER},
        weights=compute_weights(accuracies),
        normalizer=normalizer,
        labels=tuple(labels),
    )
    return ensemble, {family: fitted[family][1] for family in CLASSIFIER_ORDER}


# ---------------------------------- Evaluation ---------------------------------- #


def _percent(hits: int, total: int) -> float:
    return round(100.0 * hits / total, 2) if total else 0.0


@dataclass
class _Tally:
    """Raw hit counts, poolable across folds."""

    classes: int
    depth: int
    total: int = 0
    classifier_hits: list[int] = field(default_factory=lambda: [0] * len(CLASSIFIER_ORDER))
    top_k_hits: list[int] = field(default_factory=list)
    union_hits: int = 0
    confusion: NDArray[np.int64] = field(init=False)

    def __post_init__(self):
        self.top_k_hits = [0] * self.depth
        self.confusion = np.zeros((self.classes, self.classes), dtype=np.int64)

    def add(
        self,
        confidences: list[NDArray[np.float64]],
        label: int,
        ensemble: EnsembleModel,
        mode: FusionMode,
    ):
        decision = combine_decisions(confidences, ensemble.weights, mode)
        ranked = rank_top_k(decision, self.depth)
        self.total += 1
        for k in range(self.depth):
            self.top_k_hits[k] += int(label in ranked[: k + 1])
        for i, conf in enumerate(confidences):
            self.classifier_hits[i] += int(int(np.argmax(conf)) == label)
        self.union_hits += int(any_classifier_correct(confidences, label))
        self.confusion[label, decision.winner] += 1

    def merge(self, other: _Tally) -> None:
        self.total += other.total
        self.classifier_hits = [
            a + b for a, b in zip(self.classifier_hits, other.classifier_hits)
        ]
        self.top_k_hits = [a + b for a, b in zip(self.top_k_hits, other.top_k_hits)]
        self.union_hits += other.union_hits
        self.confusion += other.confusion


@dataclass(frozen=True)
class EvalReport:
    """Accuracies in percent, rounded to two decimals.

    ``confusion[true][predicted]`` counts the ensemble's top-1 decisions.
    """

    mode: FusionMode
    labels: tuple[str, ...]
    samples: int
    classifier_accuracy: dict[FeatureFamily, float]
    top_k_accuracy: tuple[float, ...]
    union_accuracy: float
    confusion: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...] = ()
    folds: tuple[EvalReport, ...] = ()

    @classmethod
    def _from_tally(
        cls,
        tally: _Tally,
        mode: FusionMode,
        labels: Sequence[str],
        weights: tuple[float, ...] = (),
        folds: tuple[EvalReport, ...] = (),
    ) -> EvalReport:
        return cls(
            mode=mode,
            labels=tuple(labels),
            samples=tally.total,
            classifier_accuracy={
                family: _percent(hits, tally.total)
                for family, hits in zip(CLASSIFIER_ORDER, tally.classifier_hits)
            },
            top_k_accuracy=tuple(_percent(h, tally.total) for h in tally.top_k_hits),
            union_accuracy=_percent(tally.union_hits, tally.total),
            confusion=tuple(tuple(int(c) for c in row) for row in tally.confusion),
            weights=weights,
            folds=folds,
        )

    @property
    def best_classifier_accuracy(self) -> float:
        return max(self.classifier_accuracy.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "labels": list(self.labels),
            "samples": self.samples,
            "classifier_accuracy": {
                f.value: self.classifier_accuracy[f] for f in CLASSIFIER_ORDER
            },
            "top_k_accuracy": list(self.top_k_accuracy),
            "union_accuracy": self.union_accuracy,
            "confusion": [list(row) for row in self.confusion],
            "weights": list(self.weights),
            "folds": [fold.to_dict() for fold in self.folds],
        }


def _tally(
    ensemble: EnsembleModel,
    samples: Sequence[LabeledSample],
    mode: FusionMode,
    top_k: int,
) -> _Tally:
    if not samples:
        raise EmptyDataset("No test samples to evaluate")
    tally = _Tally(classes=len(ensemble.labels), depth=min(top_k, len(ensemble.labels)))
    for s in samples:
        if s.features is None:
            raise ValueError(f"Sample {s.id} has no extracted features")
        tally.add(ensemble.confidences(s.features), s.label, ensemble, mode)
    return tally


def evaluate(
    ensemble: EnsembleModel,
    samples: Sequence[LabeledSample],
    mode: FusionMode | str = FusionMode.CONFSUM,
    top_k: int = 5,
) -> EvalReport:
    """Score ``ensemble`` on labeled samples with extracted features.

    Reports each classifier's top-1 accuracy, the ensemble's top-1 to top-k
    accuracies (``k`` capped at the class count), the share of samples at
    least one classifier gets right and the confusion matrix.
    """
    mode = FusionMode(mode)
    tally = _tally(ensemble, samples, mode, top_k)
    return EvalReport._from_tally(tally, mode, ensemble.labels, ensemble.weights.omega)


def cross_validate(
    samples: Sequence[LabeledSample],
    labels: Sequence[str],
    settings: Settings,
) -> EvalReport:
    """Train and test on every split of the configured protocol.

    Folds run one after another. The returned report pools the test
    predictions of all folds and keeps one report per fold.
    """
    if Protocol(settings.protocol) is Protocol.HOLDOUT:
        splits = [holdout_split(samples, settings.fold_seed, settings.holdout_train_fraction)]
    else:
        splits = three_fold_split(samples, settings.fold_seed).splits()

    by_id = {s.id: s for s in samples}
    mode = FusionMode(settings.eval_mode)
    pooled: _Tally | None = None
    folds = []
    for i, split in enumerate(splits, start=1):
        ensemble, _ = train_ensemble([by_id[sid] for sid in split.train], labels, settings)
        tally = _tally(ensemble, [by_id[sid] for sid in split.test], mode, settings.top_k)
        fold = EvalReport._from_tally(tally, mode, labels, ensemble.weights.omega)
        log.info(
            f"Fold {i}/{len(splits)}: top-1 {fold.top_k_accuracy[0]:.2f}% "
            f"on {fold.samples} samples"
        )
        folds.append(fold)
        if pooled is None:
            pooled = tally
        else:
            pooled.merge(tally)

    assert pooled is not None
    return EvalReport._from_tally(pooled, mode, labels, folds=tuple(folds))


# ----------------------------------- Reporting ----------------------------------- #


def _report_lines(report: EvalReport) -> Iterator[str]:
    yield f"Samples: {report.samples}"
    yield f"Fusion mode: {report.mode.value}"
    yield ""
    yield "Classifier accuracy"
    for family in CLASSIFIER_ORDER:
        yield f"  {family.value:<14}{report.classifier_accuracy[family]:>7.2f}%"
    if report.weights:
        yield "Weights"
        for family, w in zip(CLASSIFIER_ORDER, report.weights):
            yield f"  {family.value:<14}{w:>8.4f}"
    yield ""
    yield "Ensemble accuracy"
    for k, acc in enumerate(report.top_k_accuracy, start=1):
        yield f"  {f'top {k}':<14}{acc:>7.2f}%"
    yield f"  {'any':<14}{report.union_accuracy:>7.2f}%"


def format_report(report: EvalReport) -> str:
    """Plain text tables: classifier accuracies, then ensemble top-k.

    Row order is fixed so the text can be parsed.
    """
    lines = list(_report_lines(report))
    for i, fold in enumerate(report.folds, start=1):
        lines += ["", f"--- Fold {i} ---", *_report_lines(fold)]
    return "\n".join(lines) + "\n"
