from .config import CemConfig, ConfigError, HEADS_BY_VARIANT
from .losses import (
    ConfidenceSummary,
    deletion_loss,
    estimate_summary,
    oracle_output,
    total_loss,
    utterance_loss,
    word_loss,
)
from .model import CemModel, CemOutput
from .rescoring import rescore_corpus, rescore_nbest
from .training import TrainingDiverged, TrainResult, train

__all__ = [
    "CemConfig",
    "CemModel",
    "CemOutput",
    "ConfidenceSummary",
    "ConfigError",
    "HEADS_BY_VARIANT",
    "TrainResult",
    "TrainingDiverged",
    "deletion_loss",
    "estimate_summary",
    "oracle_output",
    "rescore_corpus",
    "rescore_nbest",
    "total_loss",
    "train",
    "utterance_loss",
    "word_loss",
]
