"""Weighted majority voting over the four family classifiers."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray

from glyphvote.classifier import MlpModel, predict_class, predict_confidences
from glyphvote.constants import CLASSIFIER_ORDER, FeatureFamily
from glyphvote.exceptions import BadK, DimensionMismatch, NonPositiveAccuracy

if TYPE_CHECKING:
    from glyphvote.dataset import Normalizer
    from glyphvote.features import FeatureBundle

log = logging.getLogger(__name__)


class FusionMode(str, Enum):
    """How a classifier's outputs become per-class support ``O_ik``.

    VOTE gives the argmax class the whole support. CONFSUM spreads it over all
    classes proportionally to the outputs.
    """

    VOTE = "vote"
    CONFSUM = "confsum"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class FusionWeights:
    """Classifier weights ``omega_k = d_k / sum(d)``, in classifier order."""

    omega: tuple[float, ...]
    source_accuracies: tuple[float, ...]

    def __post_init__(self):
        if len(self.omega) != len(self.source_accuracies):
            raise DimensionMismatch(
                f"{len(self.omega)} weights for {len(self.source_accuracies)} accuracies"
            )

    @classmethod
    def uniform(cls, count: int = len(CLASSIFIER_ORDER)) -> FusionWeights:
        return compute_weights([1.0] * count)


def compute_weights(accuracies: Sequence[float]) -> FusionWeights:
    """Normalize accuracies into fusion weights.

    Raises
    ------
    NonPositiveAccuracy
        If any accuracy is zero or negative.
    """
    d = tuple(float(a) for a in accuracies)
    if not d:
        raise DimensionMismatch("No accuracies to weight")
    for k, a in enumerate(d):
        if not a > 0:
            raise NonPositiveAccuracy(
                f"Accuracy {a} is not positive", where=_classifier_name(k)
            )
    total = sum(d)
    return FusionWeights(omega=tuple(a / total for a in d), source_accuracies=d)


def _classifier_name(k: int) -> str:
    return CLASSIFIER_ORDER[k].value if k < len(CLASSIFIER_ORDER) else f"#{k}"


@dataclass(frozen=True, eq=False)
class CombinedDecision:
    """Fused support per class.

    ``ranked`` orders classes by ``scores``, then by ``confsum_scores``, then by
    index. ``confsum_scores`` equals ``scores`` in CONFSUM mode.
    """

    scores: NDArray[np.float64]
    confsum_scores: NDArray[np.float64]
    ranked: tuple[int, ...]
    mode: FusionMode

    @property
    def winner(self) -> int:
        return self.ranked[0]

    def __len__(self) -> int:
        return len(self.ranked)


def _support_matrix(
    per_classifier: Sequence[ArrayLike], mode: FusionMode
) -> NDArray[np.float64]:
    """``O`` as a ``classifiers x classes`` array."""
    confs = np.asarray(per_classifier, dtype=np.float64)
    if mode is FusionMode.VOTE:
        votes = np.zeros_like(confs)
        votes[np.arange(len(confs)), confs.argmax(axis=1)] = 1.0
        return votes
    totals = confs.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        shares = confs / totals
    # An all-zero row spreads its support evenly.
    return np.where(totals > 0, shares, 1.0 / confs.shape[1])


def combine_decisions(
    per_classifier: Sequence[ArrayLike],
    weights: FusionWeights,
    mode: FusionMode | str = FusionMode.VOTE,
) -> CombinedDecision:
    """Fuse confidence vectors into ``d_i = sum_k omega_k * O_ik``.

    Raises
    ------
    DimensionMismatch
        If the vectors differ in length or do not match the weights.
    """
    mode = FusionMode(mode)
    rows = [np.asarray(c, dtype=np.float64).ravel() for c in per_classifier]
    if len(rows) != len(weights.omega):
        raise DimensionMismatch(
            f"{len(rows)} confidence vectors for {len(weights.omega)} weights"
        )
    lengths = {r.size for r in rows}
    if len(lengths) != 1 or 0 in lengths:
        raise DimensionMismatch(f"Confidence vectors of unequal lengths {sorted(lengths)}")

    omega = np.asarray(weights.omega)
    confsum = omega @ _support_matrix(rows, FusionMode.CONFSUM)
    scores = confsum if mode is FusionMode.CONFSUM else omega @ _support_matrix(rows, mode)
    index = np.arange(scores.size)
    ranked = np.lexsort((index, -confsum, -scores))
    return CombinedDecision(
        scores=scores,
        confsum_scores=confsum,
        ranked=tuple(int(i) for i in ranked),
        mode=mode,
    )


def rank_top_k(decision: CombinedDecision, k: int) -> list[int]:
    """The ``k`` best classes, best first.

    Raises
    ------
    BadK
        Unless ``1 <= k <= m``.
    """
    if not 1 <= k <= len(decision):
        raise BadK(f"k = {k} outside 1..{len(decision)}")
    return list(decision.ranked[:k])


def any_classifier_correct(per_classifier: Sequence[ArrayLike], label: int) -> bool:
    """Whether at least one classifier's top choice is ``label``."""
    return any(predict_class(c) == label for c in per_classifier)


@dataclass(frozen=True)
class EnsembleModel:
    """Four trained networks with everything needed to classify raw features.

    Parameters
    ----------
    models : dict[FeatureFamily, MlpModel]
        One network per feature family.
    weights : FusionWeights
        Weights in classifier order.
    normalizer : Normalizer
        Min-max statistics the networks were trained with.
    labels : tuple[str, ...]
        Class names by index.
    """

    models: dict[FeatureFamily, MlpModel]
    weights: FusionWeights
    normalizer: Normalizer
    labels: tuple[str, ...]

    def __post_init__(self):
        missing = set(CLASSIFIER_ORDER) - set(self.models)
        if missing:
            raise DimensionMismatch(
                f"Ensemble lacks classifiers {sorted(f.value for f in missing)}"
            )
        for family, model in self.models.items():
            if model.config.output_size != len(self.labels):
                raise DimensionMismatch(
                    f"{model.config.output_size} outputs for {len(self.labels)} labels",
                    where=family.value,
                )

    def confidences(self, bundle: FeatureBundle) -> list[NDArray[np.float64]]:
        """Each classifier's outputs for one image, in classifier order."""
        normalized = self.normalizer.apply(bundle)
        return [
            predict_confidences(self.models[family], normalized[family].values)
            for family in CLASSIFIER_ORDER
        ]

    def classify(
        self, bundle: FeatureBundle, mode: FusionMode | str = FusionMode.VOTE
    ) -> CombinedDecision:
        return combine_decisions(self.confidences(bundle), self.weights, mode)

    def top_k(
        self,
        bundle: FeatureBundle,
        k: int = 5,
        mode: FusionMode | str = FusionMode.VOTE,
    ) -> list[tuple[str, float]]:
        """Best ``k`` class names with their fused scores."""
        decision = self.classify(bundle, mode)
        return [
            (self.labels[i], float(decision.scores[i])) for i in rank_top_k(decision, k)
        ]
