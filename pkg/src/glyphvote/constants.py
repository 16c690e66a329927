from __future__ import annotations

from collections.abc import Sequence
from enum import Enum
from typing import Final


class FeatureFamily(str, Enum):
    """The four feature families, one classifier each."""

    SHADOW = "shadow"
    INTERSECTION = "intersection"
    LINE_FIT = "linefit"
    CHAIN_CODE = "chaincode"

    def __str__(self) -> str:
        return self.value


CANVAS_SIZE: Final[int] = 100

INITIAL_THRESHOLD: Final[float] = 128.0
THRESHOLD_TOLERANCE: Final[float] = 0.02
MAX_THRESHOLD_ITERATIONS: Final[int] = 50

# Freeman direction code -> (dx, dy) in image coordinates (y grows downwards).
FREEMAN_STEPS: Final[tuple[tuple[int, int], ...]] = (
    (1, 0),  # 0 E
    (1, -1),  # 1 NE
    (0, -1),  # 2 N
    (-1, -1),  # 3 NW
    (-1, 0),  # 4 W
    (-1, 1),  # 5 SW
    (0, 1),  # 6 S
    (1, 1),  # 7 SE
)

FAMILY_SIZES: Final[dict[FeatureFamily, int]] = {
    FeatureFamily.SHADOW: 16,
    FeatureFamily.INTERSECTION: 32,
    FeatureFamily.LINE_FIT: 48,
    FeatureFamily.CHAIN_CODE: 200,
}

# k = 1..4 of the fusion weights.
CLASSIFIER_ORDER: Final[Sequence[FeatureFamily]] = (
    FeatureFamily.CHAIN_CODE,
    FeatureFamily.INTERSECTION,
    FeatureFamily.SHADOW,
    FeatureFamily.LINE_FIT,
)

DEFAULT_HIDDEN_SIZES: Final[dict[FeatureFamily, int]] = {
    FeatureFamily.INTERSECTION: 20,
    FeatureFamily.SHADOW: 30,
    FeatureFamily.LINE_FIT: 40,
    FeatureFamily.CHAIN_CODE: 70,
}

IMAGE_SUFFIXES: Final[frozenset[str]] = frozenset({".png", ".pgm"})
