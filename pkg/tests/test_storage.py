from __future__ import annotations

import json

import numpy as np
import pytest

from glyphvote.classifier import MlpConfig, init_mlp, predict_confidences
from glyphvote.constants import CLASSIFIER_ORDER, FeatureFamily
from glyphvote.dataset import evaluate, load_dataset
from glyphvote.ensemble import FusionMode
from glyphvote.exceptions import DimensionMismatch, ModelFormatError
from glyphvote.storage import (
    MANIFEST_NAME,
    load_ensemble,
    read_feature_csv,
    read_model,
    save_ensemble,
    write_feature_csv,
    write_model,
    write_report,
)
from tests.helpers import small_ensemble


class TestFeatureCsv:
    def test_round_trip(self, corpus, tmp_path):
        samples, labels = corpus
        path = tmp_path / "out" / "features.csv"
        rows = write_feature_csv(path, samples, labels)
        assert rows == 4 * len(samples)

        restored = read_feature_csv(path)
        assert [sid for sid, _, _ in restored] == [s.id for s in samples]
        for (sid, label, bundle), sample in zip(restored, samples):
            assert label == labels[sample.label]
            for family in CLASSIFIER_ORDER:
                assert np.allclose(
                    bundle[family].values, sample.features[family].values, rtol=1e-8
                )

    def test_layout(self, corpus, tmp_path):
        samples, labels = corpus
        path = tmp_path / "features.csv"
        write_feature_csv(path, samples[:1], labels)
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        assert header[:3] == ["sample_id", "label", "family"]
        assert header[3] == "i0" and header[-1] == "i199"
        families = [line.split(",")[2] for line in lines[1:]]
        assert families == [f.value for f in CLASSIFIER_ORDER]
        shadow = next(line for line in lines[1:] if ",shadow," in line).split(",")
        assert sum(cell != "" for cell in shadow[3:]) == 16

    def test_needs_features(self, corpus_dir, tmp_path):
        samples, labels = load_dataset(corpus_dir)
        with pytest.raises(ValueError):
            write_feature_csv(tmp_path / "f.csv", samples, labels)

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("id,label\n")
        with pytest.raises(DimensionMismatch):
            read_feature_csv(path)


class TestModelFiles:
    def test_round_trip(self, rng, tmp_path):
        model = init_mlp(MlpConfig(16, 4, 3, seed=2))
        write_model(tmp_path / "m.json", model, FeatureFamily.SHADOW, ["a", "b", "c"])
        restored, family, labels = read_model(tmp_path / "m.json")
        assert family is FeatureFamily.SHADOW
        assert labels == ["a", "b", "c"]
        x = rng.uniform(0, 1, (100, 16))
        assert np.array_equal(predict_confidences(model, x), predict_confidences(restored, x))

    @pytest.mark.parametrize(
        "content",
        ["", "{not json", json.dumps({"family": "shadow"}), json.dumps([1, 2])],
    )
    def test_malformed(self, tmp_path, content):
        path = tmp_path / "m.json"
        path.write_text(content)
        with pytest.raises(ModelFormatError) as excinfo:
            read_model(path)
        assert excinfo.value.where == str(path)

    def test_wrong_shapes(self, tmp_path):
        path = tmp_path / "m.json"
        write_model(path, init_mlp(MlpConfig(16, 4, 3)), FeatureFamily.SHADOW, ["a"] * 3)
        doc = json.loads(path.read_text())
        doc["config"]["hidden_size"] = 5
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelFormatError):
            read_model(path)

    def test_non_finite_weights(self, tmp_path):
        path = tmp_path / "m.json"
        write_model(path, init_mlp(MlpConfig(16, 4, 3)), FeatureFamily.SHADOW, ["a"] * 3)
        doc = json.loads(path.read_text())
        doc["b2"][0] = float("nan")
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelFormatError) as excinfo:
            read_model(path)
        assert excinfo.value.where == str(path)

    def test_missing(self, tmp_path):
        with pytest.raises(ModelFormatError):
            read_model(tmp_path / "none.json")


class TestEnsembleFiles:
    @pytest.fixture
    def saved(self, tmp_path):
        ensemble = small_ensemble(("p", "q", "r", "s"), seed=4)
        save_ensemble(tmp_path, ensemble, FusionMode.VOTE, FusionMode.CONFSUM)
        return ensemble, tmp_path

    def test_files(self, saved):
        _, directory = saved
        assert sorted(p.name for p in directory.iterdir()) == sorted(
            [MANIFEST_NAME, *(f"{f.value}.json" for f in CLASSIFIER_ORDER)]
        )

    def test_identical_predictions(self, saved, corpus):
        ensemble, directory = saved
        loaded, manifest = load_ensemble(directory)
        assert manifest["fusion_mode"] is FusionMode.VOTE
        assert manifest["eval_mode"] is FusionMode.CONFSUM
        assert loaded.labels == ensemble.labels
        assert loaded.weights == ensemble.weights

        samples, _ = corpus
        for s in samples:
            for a, b in zip(ensemble.confidences(s.features), loaded.confidences(s.features)):
                assert np.array_equal(a, b)
            assert loaded.top_k(s.features, 4) == ensemble.top_k(s.features, 4)

    def test_manifest_lists_weights(self, saved):
        ensemble, directory = saved
        manifest = json.loads((directory / MANIFEST_NAME).read_text())
        assert [c["family"] for c in manifest["classifiers"]] == [
            f.value for f in CLASSIFIER_ORDER
        ]
        assert [c["weight"] for c in manifest["classifiers"]] == list(ensemble.weights.omega)
        assert manifest["labels"] == ["p", "q", "r", "s"]

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ModelFormatError):
            load_ensemble(tmp_path)

    def test_missing_family(self, saved):
        _, directory = saved
        path = directory / MANIFEST_NAME
        manifest = json.loads(path.read_text())
        manifest["classifiers"] = manifest["classifiers"][:3]
        path.write_text(json.dumps(manifest))
        with pytest.raises(ModelFormatError):
            load_ensemble(directory)

    def test_unknown_fusion_mode(self, saved):
        _, directory = saved
        path = directory / MANIFEST_NAME
        manifest = json.loads(path.read_text())
        manifest["fusion_mode"] = "borda"
        path.write_text(json.dumps(manifest))
        with pytest.raises(ModelFormatError) as excinfo:
            load_ensemble(directory)
        assert "fusion_mode" in str(excinfo.value)

    def test_label_mismatch(self, saved):
        _, directory = saved
        path = directory / MANIFEST_NAME
        manifest = json.loads(path.read_text())
        manifest["labels"] = ["p", "q", "r", "t"]
        path.write_text(json.dumps(manifest))
        with pytest.raises(ModelFormatError):
            load_ensemble(directory)

    def test_zero_accuracy(self, saved):
        _, directory = saved
        path = directory / MANIFEST_NAME
        manifest = json.loads(path.read_text())
        manifest["classifiers"][2]["accuracy"] = 0.0
        path.write_text(json.dumps(manifest))
        with pytest.raises(ModelFormatError):
            load_ensemble(directory)

    def test_deleted_model(self, saved):
        _, directory = saved
        (directory / "shadow.json").unlink()
        with pytest.raises(ModelFormatError):
            load_ensemble(directory)


class TestReports:
    def test_text_and_json(self, corpus, tmp_path):
        samples, labels = corpus
        report = evaluate(small_ensemble(labels), samples)
        text, data = write_report(tmp_path / "reports", report)
        assert text.read_text().startswith(f"Samples: {len(samples)}")
        assert json.loads(data.read_text()) == report.to_dict()
