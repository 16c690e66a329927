"""On-disk formats: feature CSV, model and ensemble manifest JSON, reports.

JSON documents are validated with pydantic when read. Floats are written
with Python's shortest round-trip representation, so a model reloads to the
identical bits.
"""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterable, Sequence
from functools import cache
from pathlib import Path
from typing import Any

from pydantic import TypeAdapter, ValidationError
from typing_extensions import TypedDict

from glyphvote.classifier import MlpModel, from_document, to_document
from glyphvote.constants import CLASSIFIER_ORDER, FAMILY_SIZES, FeatureFamily
from glyphvote.dataset import EvalReport, LabeledSample, Normalizer, format_report
from glyphvote.ensemble import EnsembleModel, FusionMode, compute_weights
from glyphvote.exceptions import (
    DimensionMismatch,
    ModelFormatError,
    NonFiniteLoss,
    NonPositiveAccuracy,
)
from glyphvote.features import FeatureBundle, FeatureVector

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
CSV_WIDTH = max(FAMILY_SIZES.values())


# ---------------------------------- Feature CSV ---------------------------------- #


def _csv_header() -> list[str]:
    return ["sample_id", "label", "family", *(f"i{i}" for i in range(CSV_WIDTH))]


def write_feature_csv(
    path: Path | str, samples: Iterable[LabeledSample], labels: Sequence[str]
) -> int:
    """Write one row per sample and family, returning the number of rows.

    Values carry nine significant digits; families shorter than the widest
    leave their trailing cells empty.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_csv_header())
        for sample in samples:
            if sample.features is None:
                raise ValueError(f"Sample {sample.id} has no extracted features")
            for vector in sample.features:
                cells = [f"{v:.9g}" for v in vector.values]
                cells += [""] * (CSV_WIDTH - len(cells))
                writer.writerow([sample.id, labels[sample.label], vector.family.value, *cells])
                rows += 1
    log.info(f"Wrote {rows} feature rows to {path}")
    return rows


def read_feature_csv(path: Path | str) -> list[tuple[str, str, FeatureBundle]]:
    """Read a feature CSV back as ``(sample_id, label, bundle)`` in file order."""
    vectors: dict[str, list[FeatureVector]] = {}
    label_of: dict[str, str] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != _csv_header():
            raise DimensionMismatch("Unexpected feature CSV header", where=str(path))
        for row in reader:
            sample_id, label, family = row[:3]
            values = [float(v) for v in row[3:] if v != ""]
            vectors.setdefault(sample_id, []).append(FeatureVector(FeatureFamily(family), values))
            label_of[sample_id] = label
    return [
        (sid, label_of[sid], FeatureBundle.from_vectors(vs)) for sid, vs in vectors.items()
    ]


# ------------------------------- Model documents ------------------------------- #


class MlpConfigDocument(TypedDict):
    input_size: int
    hidden_size: int
    output_size: int
    learning_rate: float
    momentum: float
    max_epochs: int
    seed: int
    target_sse: float


class ModelDocument(TypedDict):
    family: FeatureFamily
    labels: list[str]
    config: MlpConfigDocument
    w1: list[list[float]]
    b1: list[float]
    w2: list[list[float]]
    b2: list[float]


class ClassifierEntry(TypedDict):
    family: FeatureFamily
    model: str
    accuracy: float
    weight: float


class NormalizerBounds(TypedDict):
    low: list[float]
    high: list[float]


class ManifestDocument(TypedDict):
    version: int
    labels: list[str]
    fusion_mode: FusionMode
    eval_mode: FusionMode
    classifiers: list[ClassifierEntry]
    normalizer: dict[str, NormalizerBounds]


@cache
def _adapter(schema: type) -> TypeAdapter[Any]:
    return TypeAdapter(schema)


def _read_document(path: Path, schema: type) -> Any:
    try:
        raw = json.loads(path.read_text())
        return _adapter(schema).validate_python(raw)
    except FileNotFoundError as e:
        raise ModelFormatError("File not found", where=str(path)) from e
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"Invalid JSON: {e}", where=str(path)) from e
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise ModelFormatError(f"{first['msg']} at '{loc}'", where=str(path)) from e


def _write_json(path: Path, doc: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n")


def write_model(
    path: Path | str, model: MlpModel, family: FeatureFamily, labels: Sequence[str]
) -> None:
    _write_json(
        Path(path),
        {"family": FeatureFamily(family).value, "labels": list(labels), **to_document(model)},
    )


def read_model(path: Path | str) -> tuple[MlpModel, FeatureFamily, list[str]]:
    """Load a model file.

    Raises
    ------
    ModelFormatError
        If the file is missing, malformed or inconsistent.
    """
    path = Path(path)
    doc: ModelDocument = _read_document(path, ModelDocument)
    try:
        model = from_document(dict(doc))
    except (ValueError, DimensionMismatch, NonFiniteLoss) as e:
        raise ModelFormatError(str(e), where=str(path)) from e
    return model, doc["family"], doc["labels"]


def save_ensemble(
    directory: Path | str,
    ensemble: EnsembleModel,
    fusion_mode: FusionMode | str = FusionMode.VOTE,
    eval_mode: FusionMode | str = FusionMode.CONFSUM,
) -> Path:
    """Write the four model files and the manifest; returns the manifest path."""
    directory = Path(directory)
    entries = []
    for k, family in enumerate(CLASSIFIER_ORDER):
        name = f"{family.value}.json"
        write_model(directory / name, ensemble.models[family], family, ensemble.labels)
        entries.append(
            {
                "family": family.value,
                "model": name,
                "accuracy": ensemble.weights.source_accuracies[k],
                "weight": ensemble.weights.omega[k],
            }
        )
    manifest = directory / MANIFEST_NAME
    _write_json(
        manifest,
        {
            "version": MANIFEST_VERSION,
            "labels": list(ensemble.labels),
            "fusion_mode": FusionMode(fusion_mode).value,
            "eval_mode": FusionMode(eval_mode).value,
            "classifiers": entries,
            "normalizer": ensemble.normalizer.to_document(),
        },
    )
    log.info(f"Saved ensemble to {directory}")
    return manifest


def load_ensemble(directory: Path | str) -> tuple[EnsembleModel, ManifestDocument]:
    """Load an ensemble written by :func:`save_ensemble`.

    Weights are recomputed from the stored accuracies.

    Raises
    ------
    ModelFormatError
        If the manifest or a model file is missing or inconsistent.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    manifest: ManifestDocument = _read_document(manifest_path, ManifestDocument)
    if manifest["version"] != MANIFEST_VERSION:
        raise ModelFormatError(
            f"Unsupported manifest version {manifest['version']}", where=str(manifest_path)
        )

    entries = {e["family"]: e for e in manifest["classifiers"]}
    if set(entries) != set(CLASSIFIER_ORDER):
        raise ModelFormatError(
            "Manifest must list exactly one model per feature family",
            where=str(manifest_path),
        )
    models = {}
    for family in CLASSIFIER_ORDER:
        model, stored_family, labels = read_model(directory / entries[family]["model"])
        if stored_family != family or labels != manifest["labels"]:
            raise ModelFormatError(
                "Model does not match its manifest entry", where=entries[family]["model"]
            )
        models[family] = model

    try:
        ensemble = EnsembleModel(
            models=models,
            weights=compute_weights([entries[f]["accuracy"] for f in CLASSIFIER_ORDER]),
            normalizer=Normalizer.from_document(manifest["normalizer"]),
            labels=tuple(manifest["labels"]),
        )
    except (ValueError, DimensionMismatch, NonPositiveAccuracy) as e:
        raise ModelFormatError(str(e), where=str(manifest_path)) from e
    return ensemble, manifest


# ------------------------------------ Reports ------------------------------------ #


def write_report(directory: Path | str, report: EvalReport, stem: str = "report") -> tuple[Path, Path]:
    """Write the text tables and the JSON form of ``report``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    text, data = directory / f"{stem}.txt", directory / f"{stem}.json"
    text.write_text(format_report(report))
    _write_json(data, report.to_dict())
    return text, data
