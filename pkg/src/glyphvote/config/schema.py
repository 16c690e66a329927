"""Run settings of the recognition pipeline.

String metadata in ``Annotated`` fields doubles as the comment written above
the key in the default settings file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Annotated

from pydantic import Field

from glyphvote.constants import DEFAULT_HIDDEN_SIZES, FeatureFamily
from glyphvote.ensemble import FusionMode


class Protocol(str, Enum):
    """Evaluation protocol of ``train`` and ``eval``."""

    THREE_FOLD = "3fold"
    HOLDOUT = "holdout"

    def __str__(self) -> str:
        return self.value


Count = Annotated[int, Field(ge=1)]
Fraction = Annotated[float, Field(gt=0, lt=1)]


@dataclass
class Settings:
    """Settings shared by every subcommand."""

    data_root: Annotated[
        Path | None, "Dataset directory, one subdirectory per class."
    ] = None
    out_dir: Annotated[Path | None, "Where train writes models and reports."] = None
    models_dir: Annotated[Path | None, "Trained ensemble used by eval and predict."] = (
        None
    )
    seed: Annotated[int, "Seeds weight initialization and sample order."] = 0
    fold_seed: Annotated[int, "Seeds the assignment of samples to folds."] = 0
    epochs: Annotated[Count, "Maximum training epochs per network."] = 300
    target_sse: Annotated[
        float, Field(ge=0), "Stop training once an epoch's squared error reaches this."
    ] = 0.0
    learning_rate: Annotated[float, Field(gt=0)] = 0.8
    momentum: Annotated[float, Field(ge=0, lt=1)] = 0.7
    hidden_intersection: Annotated[Count, "Hidden units per classifier."] = (
        DEFAULT_HIDDEN_SIZES[FeatureFamily.INTERSECTION]
    )
    hidden_shadow: Count = DEFAULT_HIDDEN_SIZES[FeatureFamily.SHADOW]
    hidden_linefit: Count = DEFAULT_HIDDEN_SIZES[FeatureFamily.LINE_FIT]
    hidden_chaincode: Count = DEFAULT_HIDDEN_SIZES[FeatureFamily.CHAIN_CODE]
    fusion_mode: Annotated[
        FusionMode, "Fusion of single predictions: vote or confsum."
    ] = FusionMode.VOTE
    eval_mode: Annotated[FusionMode, "Fusion used for top-k reports."] = (
        FusionMode.CONFSUM
    )
    protocol: Annotated[Protocol, "3fold or holdout."] = Protocol.THREE_FOLD
    holdout_train_fraction: Fraction = 0.68
    validation_fraction: Annotated[
        Fraction, "Share of each training set held back to measure fusion weights."
    ] = 0.1
    top_k: Count = 5
    workers: Annotated[Count, "Threads used for feature extraction."] = 1
    skip_unreadable: Annotated[bool, "Skip undecodable images instead of failing."] = (
        False
    )
    debug_dump: Annotated[
        bool, "Write every preprocessing stage as PGM. Forced by GLYPH_DEBUG_DUMP=1."
    ] = False
    debug_dir: Path = field(default_factory=lambda: Path("glyph_debug"))

    @property
    def hidden_sizes(self) -> dict[FeatureFamily, int]:
        return {
            FeatureFamily.INTERSECTION: self.hidden_intersection,
            FeatureFamily.SHADOW: self.hidden_shadow,
            FeatureFamily.LINE_FIT: self.hidden_linefit,
            FeatureFamily.CHAIN_CODE: self.hidden_chaincode,
        }


@dataclass
class RunConfig:
    """A subcommand together with its resolved settings."""

    command: str
    settings: Settings = field(default_factory=Settings)
