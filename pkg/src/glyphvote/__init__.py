from .classifier import MlpConfig, MlpModel, init_mlp, predict_confidences, train
from .config import Settings
from .constants import FeatureFamily
from .dataset import (
    EvalReport,
    cross_validate,
    evaluate,
    extract_all,
    format_report,
    load_dataset,
    three_fold_split,
    train_ensemble,
)
from .ensemble import EnsembleModel, FusionMode, combine_decisions, compute_weights
from .features import FeatureBundle, extract_feature_bundle

__all__ = [
    "EnsembleModel",
    "EvalReport",
    "FeatureBundle",
    "FeatureFamily",
    "FusionMode",
    "MlpConfig",
    "MlpModel",
    "Settings",
    "combine_decisions",
    "compute_weights",
    "cross_validate",
    "evaluate",
    "extract_all",
    "extract_feature_bundle",
    "format_report",
    "init_mlp",
    "load_dataset",
    "predict_confidences",
    "three_fold_split",
    "train",
    "train_ensemble",
]
