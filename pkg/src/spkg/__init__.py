"""Bilinear knowledge graph embeddings trained by negative sampling or by a closed-form score-sum regularizer."""

from .data import (
    Dataset,
    Vocabulary,
    build_vocabulary,
    clean_dataset,
    cwa_psi,
    dataset_stats,
    load_dataset,
    load_split,
)
from .errors import ConfigError, DataError, NumericalError, ParseError
from .evaluation import (
    FilterIndex,
    calibration_metrics,
    platt_apply,
    platt_fit,
    probability_histogram,
    rank_entity,
    ranking_metrics,
)
from .models import (
    EmbeddingModel,
    ModelConfig,
    init_embeddings,
    load_checkpoint,
    probability,
    save_checkpoint,
    score_constrained,
    score_gradients,
    score_raw,
    score_shifted,
)
from .objectives import (
    ObjectiveConfig,
    brute_force_score_sum,
    factorized_score_sum,
    neg_sample,
    negsampling_batch_loss,
    softplus_loss,
    sp_batch_loss,
    sp_regularizer,
)
from .trainer import TrainConfig, train, train_epoch

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "Dataset", "EmbeddingModel", "FilterIndex", "ModelConfig",
    "NumericalError", "ObjectiveConfig", "ParseError", "TrainConfig", "Vocabulary",
    "brute_force_score_sum", "build_vocabulary", "calibration_metrics", "clean_dataset",
    "cwa_psi", "dataset_stats", "factorized_score_sum", "init_embeddings", "load_checkpoint",
    "load_dataset", "load_split", "neg_sample", "negsampling_batch_loss", "platt_apply",
    "platt_fit", "probability", "probability_histogram", "rank_entity", "ranking_metrics",
    "save_checkpoint", "score_constrained", "score_gradients", "score_raw", "score_shifted",
    "softplus_loss", "sp_batch_loss", "sp_regularizer", "train", "train_epoch",
]
