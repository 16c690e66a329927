from __future__ import annotations

import numpy as np

from glyphvote.classifier import MlpConfig, init_mlp
from glyphvote.constants import CLASSIFIER_ORDER, FAMILY_SIZES
from glyphvote.dataset import Normalizer
from glyphvote.ensemble import EnsembleModel, FusionWeights
from glyphvote.features import FeatureBundle, FeatureVector
from glyphvote.imaging import BinaryImage


def rectangles(
    shape: tuple[int, int], boxes: list[tuple[int, int, int, int]]
) -> BinaryImage:
    """Union of filled ``(top, left, height, width)`` boxes."""
    px = np.zeros(shape, dtype=bool)
    for top, left, height, width in boxes:
        px[top : top + height, left : left + width] = True
    return BinaryImage(px)


def plus_sign() -> BinaryImage:
    """One pixel wide plus centred at row 50, column 50, arms of 20 px."""
    px = np.zeros((100, 100), dtype=bool)
    px[50, 30:71] = True
    px[30:71, 50] = True
    return BinaryImage(px)


def constant_bundle(value: float = 0.0) -> FeatureBundle:
    """Every feature of every family set to ``value``."""
    return FeatureBundle.from_vectors(
        FeatureVector(family, np.full(FAMILY_SIZES[family], value))
        for family in CLASSIFIER_ORDER
    )


def small_ensemble(labels=("a", "b", "c"), seed: int = 0) -> EnsembleModel:
    """Untrained networks of five hidden units, features scaled from [0, 10]."""
    models = {
        family: init_mlp(MlpConfig(FAMILY_SIZES[family], 5, len(labels), seed=seed + k))
        for k, family in enumerate(CLASSIFIER_ORDER)
    }
    normalizer = Normalizer(
        low={f: np.zeros(FAMILY_SIZES[f]) for f in CLASSIFIER_ORDER},
        high={f: np.full(FAMILY_SIZES[f], 10.0) for f in CLASSIFIER_ORDER},
    )
    return EnsembleModel(
        models=models,
        weights=FusionWeights.uniform(),
        normalizer=normalizer,
        labels=tuple(labels),
    )
