from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from glyphvote.constants import CLASSIFIER_ORDER, FAMILY_SIZES, FeatureFamily
from glyphvote.dataset import (
    EvalReport,
    LabeledSample,
    Normalizer,
    apply_normalizer,
    cross_validate,
    evaluate,
    fit_normalizer,
    format_report,
    holdout_split,
    load_dataset,
    three_fold_split,
    train_ensemble,
)
from glyphvote.ensemble import EnsembleModel, FusionMode
from glyphvote.exceptions import (
    EmptyDataset,
    EmptyTrainingSet,
    TooFewSamples,
    UnreadableImage,
)
from glyphvote.features import FeatureBundle, FeatureVector
from tests.helpers import constant_bundle, small_ensemble


def fake_samples(per_class: list[int]) -> list[LabeledSample]:
    samples = []
    for label, count in enumerate(per_class):
        for i in range(count):
            sid = f"c{label}/{i:04d}.png"
            samples.append(LabeledSample(sid, label, Path(sid)))
    return samples


def with_shadow(sample: LabeledSample, first: float, fill: float = 0.0) -> LabeledSample:
    bundle = constant_bundle(fill)
    shadow = np.full(16, fill)
    shadow[0] = first
    vectors = [v for v in bundle if v.family is not FeatureFamily.SHADOW]
    vectors.append(FeatureVector(FeatureFamily.SHADOW, shadow))
    return sample.with_features(FeatureBundle.from_vectors(vectors))


def write_png(path: Path, value: int = 0) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.full((12, 12), 255, dtype=np.uint8)
    pixels[3:9, 5:7] = value
    Image.fromarray(pixels).save(path)


class LabelOracle(EnsembleModel):
    """Every classifier answers the class stored in the first shadow feature."""

    def confidences(self, bundle):
        label = int(bundle.shadow.values[0])
        row = np.eye(len(self.labels))[label]
        return [row.copy() for _ in CLASSIFIER_ORDER]


def oracle(labels) -> LabelOracle:
    base = small_ensemble(labels)
    return LabelOracle(base.models, base.weights, base.normalizer, base.labels)


class TestLoad:
    def test_three_classes(self, tmp_path):
        for name in ("beta", "alpha", "gamma"):
            for i in range(2):
                write_png(tmp_path / name / f"{i}.png")
        samples, labels = load_dataset(tmp_path)
        assert labels == ["alpha", "beta", "gamma"]
        assert len(samples) == 6
        assert [s.id for s in samples] == sorted(s.id for s in samples)
        assert samples[0].id == "alpha/0.png"
        assert [s.label for s in samples] == [0, 0, 1, 1, 2, 2]
        assert load_dataset(tmp_path)[1] == labels

    def test_ignores_other_files(self, tmp_path):
        write_png(tmp_path / "a" / "x.png")
        (tmp_path / "a" / "notes.txt").write_text("hello")
        (tmp_path / "README").write_text("top level file")
        samples, labels = load_dataset(tmp_path)
        assert labels == ["a"]
        assert [s.id for s in samples] == ["a/x.png"]

    def test_empty_root(self, tmp_path):
        with pytest.raises(EmptyDataset):
            load_dataset(tmp_path)

    def test_missing_root(self, tmp_path):
        with pytest.raises(EmptyDataset):
            load_dataset(tmp_path / "nothing")

    def test_unreadable(self, tmp_path):
        write_png(tmp_path / "a" / "good.png")
        (tmp_path / "a" / "bad.png").write_bytes(b"garbage")
        with pytest.raises(UnreadableImage) as excinfo:
            load_dataset(tmp_path)
        assert excinfo.value.where.endswith("bad.png")

        samples, _ = load_dataset(tmp_path, skip_unreadable=True)
        assert [s.id for s in samples] == ["a/good.png"]


class TestSplits:
    def test_nine_samples(self):
        plan = three_fold_split(fake_samples([3, 3, 3]), seed=5)
        for part in plan.parts:
            assert sorted(int(sid[1]) for sid in part) == [0, 1, 2]

    def test_4900_sample_corpus(self):
        samples = fake_samples([100] * 49)
        plan = three_fold_split(samples, seed=0)
        assert [len(p) for p in plan.parts] == [1634, 1633, 1633]

        ids = [sid for part in plan.parts for sid in part]
        assert sorted(ids) == sorted(s.id for s in samples)
        for label in range(49):
            counts = [sum(sid.startswith(f"c{label}/") for sid in p) for p in plan.parts]
            assert max(counts) - min(counts) <= 1

    def test_folds(self):
        plan = three_fold_split(fake_samples([4, 5, 6]), seed=1)
        for i, (train, test) in enumerate(plan.splits()):
            assert test == plan.parts[i]
            assert not set(train) & set(test)
            assert len(train) + len(test) == 15

    def test_deterministic(self):
        samples = fake_samples([7, 8, 9])
        assert three_fold_split(samples, 3) == three_fold_split(samples, 3)
        assert three_fold_split(samples, 3) != three_fold_split(samples, 4)

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            three_fold_split(fake_samples([3, 2]), seed=0)

    def test_holdout(self):
        train, test = holdout_split(fake_samples([100] * 49), seed=0)
        assert (len(train), len(test)) == (3332, 1568)
        assert not set(train) & set(test)

    def test_holdout_keeps_both_sides(self):
        train, test = holdout_split(fake_samples([2, 2]), seed=0, train_fraction=0.9)
        assert len(train) == len(test) == 2

    def test_holdout_too_few(self):
        with pytest.raises(TooFewSamples):
            holdout_split(fake_samples([1, 4]), seed=0)


class TestNormalizer:
    def test_min_max(self):
        samples = fake_samples([2])
        train = [with_shadow(samples[0], 2.0), with_shadow(samples[1], 4.0)]
        normalizer = fit_normalizer(train)
        assert normalizer.transform(FeatureFamily.SHADOW, [2.0] + [0.0] * 15)[0] == 0.0
        assert normalizer.transform(FeatureFamily.SHADOW, [4.0] + [0.0] * 15)[0] == 1.0
        assert normalizer.transform(FeatureFamily.SHADOW, [3.0] + [0.0] * 15)[0] == 0.5
        assert normalizer.transform(FeatureFamily.SHADOW, [7.0] + [0.0] * 15)[0] == 1.0
        assert normalizer.transform(FeatureFamily.SHADOW, [-7.0] + [0.0] * 15)[0] == 0.0

    def test_constant_column(self):
        samples = [with_shadow(s, 1.0, fill=3.0) for s in fake_samples([3])]
        normalized = apply_normalizer(fit_normalizer(samples), constant_bundle(9.0))
        for vector in normalized:
            assert not vector.values.any()

    def test_training_data_in_unit_interval(self, corpus):
        samples, _ = corpus
        normalizer = fit_normalizer(samples)
        for s in samples:
            for v in normalizer.apply(s.features):
                assert np.all((v.values >= 0) & (v.values <= 1))

    def test_empty(self):
        with pytest.raises(EmptyTrainingSet):
            fit_normalizer([])

    def test_fitted_on_training_part_only(self, corpus, fast_settings):
        samples, labels = corpus
        train_ids, test_ids = three_fold_split(samples, seed=0).splits()[0]
        poisoned = {
            s.id: s.with_features(constant_bundle(1e6)) if s.id in test_ids else s
            for s in samples
        }
        clean, _ = train_ensemble(
            [s for s in samples if s.id in train_ids], labels, fast_settings
        )
        dirty, _ = train_ensemble([poisoned[sid] for sid in train_ids], labels, fast_settings)
        assert dirty.normalizer.to_document() == clean.normalizer.to_document()
        assert dirty.weights == clean.weights

    def test_holdout_test_part_never_trains(self, corpus, fast_settings):
        samples, labels = corpus
        settings = replace(fast_settings, protocol="holdout")
        _, test_ids = holdout_split(samples, settings.fold_seed, settings.holdout_train_fraction)
        poisoned = [
            s.with_features(constant_bundle(1e6)) if s.id in test_ids else s for s in samples
        ]
        clean = cross_validate(samples, labels, settings)
        dirty = cross_validate(poisoned, labels, settings)
        assert dirty.folds[0].weights == clean.folds[0].weights
        assert dirty.samples == clean.samples == len(test_ids)

    def test_document(self):
        samples = fake_samples([3])
        normalizer = fit_normalizer([with_shadow(s, float(i)) for i, s in enumerate(samples)])
        restored = Normalizer.from_document(normalizer.to_document())
        assert restored.to_document() == normalizer.to_document()

    def test_bad_document(self):
        doc = fit_normalizer([with_shadow(fake_samples([1])[0], 1.0)]).to_document()
        doc["shadow"]["low"] = [0.0] * 3
        with pytest.raises(ValueError):
            Normalizer.from_document(doc)


class TestEvaluate:
    def test_oracle_is_perfect(self):
        samples = [
            with_shadow(s, float(s.label)) for s in fake_samples([3, 4, 2, 5, 3, 1])
        ]
        labels = tuple("abcdef")
        report = evaluate(oracle(labels), samples, top_k=5)
        assert report.samples == 18
        assert report.top_k_accuracy == (100.0,) * 5
        assert set(report.classifier_accuracy.values()) == {100.0}
        assert report.union_accuracy == 100.0
        assert np.array_equal(np.diag(report.confusion), [3, 4, 2, 5, 3, 1])
        assert report.mode is FusionMode.CONFSUM

    def test_top_k_capped_by_classes(self):
        samples = [with_shadow(s, float(s.label)) for s in fake_samples([2, 2])]
        report = evaluate(oracle(("a", "b")), samples, top_k=5)
        assert len(report.top_k_accuracy) == 2

    def test_random_ensemble_invariants(self, corpus):
        samples, labels = corpus
        for seed in range(3):
            for mode in FusionMode:
                report = evaluate(small_ensemble(labels, seed=seed), samples, mode)
                top = report.top_k_accuracy
                assert list(top) == sorted(top)
                assert report.union_accuracy >= report.best_classifier_accuracy
                assert sum(map(sum, report.confusion)) == len(samples)

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            evaluate(small_ensemble(), [])


class TestTraining:
    def test_train_ensemble(self, corpus, fast_settings):
        samples, labels = corpus
        ensemble, reports = train_ensemble(samples, labels, fast_settings)
        assert ensemble.labels == tuple(labels)
        assert sum(ensemble.weights.omega) == pytest.approx(1.0)
        assert all(a >= 0.01 for a in ensemble.weights.source_accuracies)
        for k, family in enumerate(CLASSIFIER_ORDER):
            config = ensemble.models[family].config
            assert config.input_size == FAMILY_SIZES[family]
            assert config.hidden_size == fast_settings.hidden_sizes[family]
            assert config.seed == fast_settings.seed + k
            assert reports[family].epochs_run == 15

    def test_empty(self, fast_settings):
        with pytest.raises(EmptyTrainingSet):
            train_ensemble([], ["a"], fast_settings)

    def test_cross_validate(self, corpus, fast_settings):
        samples, labels = corpus
        report = cross_validate(samples, labels, fast_settings)
        assert len(report.folds) == 3
        assert report.samples == len(samples) == sum(f.samples for f in report.folds)
        for r in (report, *report.folds):
            assert list(r.top_k_accuracy) == sorted(r.top_k_accuracy)
            assert r.union_accuracy >= r.best_classifier_accuracy
        assert cross_validate(samples, labels, fast_settings).to_dict() == report.to_dict()

    def test_holdout_protocol(self, corpus, fast_settings):
        samples, labels = corpus
        settings = replace(fast_settings, protocol="holdout")
        report = cross_validate(samples, labels, settings)
        assert len(report.folds) == 1
        assert report.samples == 20


class TestReport:
    @pytest.fixture
    def report(self) -> EvalReport:
        samples = [with_shadow(s, float(s.label)) for s in fake_samples([3, 3, 3])]
        return evaluate(oracle(("x", "y", "z")), samples)

    def test_fixed_rows(self, report):
        lines = format_report(report).splitlines()
        heads = [
            line.split()[0] for line in lines if line.startswith("  ") and line.strip()
        ]
        assert heads == [f.value for f in CLASSIFIER_ORDER] * 2 + ["top"] * 3 + ["any"]
        assert "Fusion mode: confsum" in lines
        assert lines.index("Classifier accuracy") < lines.index("Ensemble accuracy")

    def test_top_rows_parse(self, report):
        lines = format_report(report).splitlines()
        rows = [line.split() for line in lines if line.strip().startswith("top ")]
        assert rows == [["top", str(k), "100.00%"] for k in (1, 2, 3)]

    def test_folds_listed(self, corpus, fast_settings):
        samples, labels = corpus
        text = format_report(cross_validate(samples, labels, fast_settings))
        assert [line for line in text.splitlines() if line.startswith("---")] == [
            "--- Fold 1 ---",
            "--- Fold 2 ---",
            "--- Fold 3 ---",
        ]

    def test_dict(self, report):
        data = report.to_dict()
        assert data["mode"] == "confsum"
        assert data["classifier_accuracy"] == {f.value: 100.0 for f in CLASSIFIER_ORDER}
        assert data["labels"] == ["x", "y", "z"]
