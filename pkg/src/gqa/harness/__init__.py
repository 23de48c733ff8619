"""Training, evaluation, configuration and the command line."""
from gqa.harness.config import TrainConfig, dumps_config, load_config, parse_config_text
from gqa.harness.metrics import (
    METRIC_KEYS,
    EvalReport,
    answer_scores,
    em_f1,
    evaluate,
    joint_scores,
    normalize_answer,
    oracle_predictor,
    supporting_scores,
)
from gqa.harness.training import Adam, SGD, TrainResult, clip_by_global_norm, train

__all__ = [
    "Adam",
    "EvalReport",
    "METRIC_KEYS",
    "SGD",
    "TrainConfig",
    "TrainResult",
    "answer_scores",
    "clip_by_global_norm",
    "dumps_config",
    "em_f1",
    "evaluate",
    "joint_scores",
    "load_config",
    "normalize_answer",
    "oracle_predictor",
    "parse_config_text",
    "supporting_scores",
    "train",
]
