"""Pluggable risk scoring: features, MLP, training contract, fusion, plug-ins."""

from .features import FEATURE_LENGTH, FEATURE_NAMES, extract_features
from .fusion import FUSION_INPUT_ORDER, FusionModel, train_fusion
from .mlp import MLP, bce_loss, sigmoid
from .plugin import ExternalScorer
from .training import (
    EnsembleScorer,
    FlavorBatchSampler,
    FoldScorerResult,
    RiskScore,
    ScorerConfig,
    TrainingExample,
    ValidationStudy,
    mask_for_view,
    rank_auc,
    score_study,
    train_fold_scorer,
    view_features,
)

__all__ = [
    "FEATURE_LENGTH", "FEATURE_NAMES", "FUSION_INPUT_ORDER", "MLP",
    "EnsembleScorer", "ExternalScorer", "FlavorBatchSampler",
    "FoldScorerResult", "FusionModel", "RiskScore", "ScorerConfig",
    "TrainingExample", "ValidationStudy", "bce_loss", "extract_features",
    "mask_for_view", "rank_auc", "score_study", "sigmoid",
    "train_fold_scorer", "train_fusion", "view_features",
]
