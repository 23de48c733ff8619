"""The graph-enriched QA network."""
from gqa.model.checkpoint import Checkpoint, dumps_checkpoint, load_checkpoint, loads_checkpoint, save_checkpoint
from gqa.model.config import ModelConfig
from gqa.model.decoder import DecoderParams, best_span, decode_span, decode_supporting, decode_type
from gqa.model.encoder import ContextState, EncoderParams, encode
from gqa.model.inputs import Prepared, prepare
from gqa.model.network import (
    Decoded,
    GQAModel,
    Prediction,
    count_params,
    decode_prediction,
    format_param_report,
    loss,
)

__all__ = [
    "Checkpoint",
    "ContextState",
    "Decoded",
    "DecoderParams",
    "EncoderParams",
    "GQAModel",
    "ModelConfig",
    "Prediction",
    "Prepared",
    "best_span",
    "count_params",
    "decode_prediction",
    "decode_span",
    "decode_supporting",
    "decode_type",
    "dumps_checkpoint",
    "encode",
    "format_param_report",
    "load_checkpoint",
    "loads_checkpoint",
    "loss",
    "prepare",
    "save_checkpoint",
]
