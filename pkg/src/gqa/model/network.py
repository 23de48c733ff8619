"""The full network, its loss, decoding and parameter accounting."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from gqa.data import ANSWER_TYPES, Example, Vocabulary
from gqa.errors import ContractError
from gqa.model.config import ModelConfig
from gqa.model.decoder import DecoderParams, best_span, decode_span, decode_supporting, decode_type
from gqa.model.encoder import ContextState, EncoderParams, encode
from gqa.model.inputs import Prepared, prepare
from gqa.nn import Module
from gqa.numerics import Tensor, ops


@dataclass
class Decoded:
    answer: str
    answer_type: str
    supporting: frozenset
    span: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "answer": self.answer,
            "type": self.answer_type,
            "supporting": sorted([list(x) for x in self.supporting]),
            "span": list(self.span),
        }


@dataclass
class Prediction:
    sp_logits: Tensor
    start_logits: Tensor
    end_logits: Tensor
    type_logits: Tensor
    stages: list[ContextState] = field(default_factory=list, repr=False)
    decoded: Decoded | None = None

    def to_dict(self) -> dict:
        out = {
            "sp_logits": self.sp_logits.data.tolist(),
            "start_logits": self.start_logits.data.tolist(),
            "end_logits": self.end_logits.data.tolist(),
            "type_logits": self.type_logits.data.tolist(),
        }
        if self.decoded is not None:
            out["decoded"] = self.decoded.to_dict()
        return out


class GQAModel(Module):
    def __init__(self, config: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.config = config
        self.seed = seed
        self.encoder = EncoderParams(config, rng)
        self.decoder = DecoderParams(config, rng)

    def forward(self, prep: Prepared, mode: str = "train", lam: float | None = None) -> Prediction:
        ctx = encode(prep, None, self.encoder, mode=mode, lam=lam)
        sp, ctx_sp = decode_supporting(ctx, self.decoder)
        start, end, ctx_span = decode_span(ctx_sp, self.decoder)
        type_logits = decode_type(ctx_span, self.decoder)
        return Prediction(sp, start, end, type_logits, stages=[ctx, ctx_sp, ctx_span])

    def predict(
        self,
        example: Example | Prepared,
        vocab: Vocabulary | None = None,
        mode: str = "eval",
        lam: float | None = None,
        threshold: float = 0.5,
    ) -> Prediction:
        prep = example if isinstance(example, Prepared) else prepare(example, vocab, require_span=False)
        pred = self.forward(prep, mode=mode, lam=lam)
        pred.decoded = decode_prediction(pred, prep, threshold)
        return pred


def decode_prediction(pred: Prediction, prep: Prepared, threshold: float = 0.5) -> Decoded:
    answer_type = ANSWER_TYPES[int(np.argmax(pred.type_logits.data))]
    span = best_span(pred.start_logits.data, pred.end_logits.data, prep.index.sent_of_word)
    if answer_type == "span":
        answer = " ".join(prep.words[span[0]: span[1] + 1])
    else:
        answer = answer_type
    probs = 1.0 / (1.0 + np.exp(-pred.sp_logits.data))
    pairs = [(d, s) for d, count in enumerate(prep.layout.sentence_counts) for s in range(count)]
    supporting = frozenset(pairs[i] for i in np.flatnonzero(probs >= threshold))
    return Decoded(answer, answer_type, supporting, span)


def _cross_entropy(logits: Tensor, target: int) -> Tensor:
    return -ops.log_softmax(logits)[target]


def loss(pred: Prediction, gold: Prepared, weights: tuple[float, float] = (1.0, 1.0)) -> Tensor:
    """CE(start) + CE(end) + w_sp * mean BCE(supporting) + w_type * CE(type).

    The span terms are dropped for yes/no answers.
    """
    w_sp, w_type = weights
    y = Tensor(gold.sp_labels)
    bce = ops.mean(ops.softplus(pred.sp_logits) - pred.sp_logits * y)
    total = w_sp * bce + w_type * _cross_entropy(pred.type_logits, gold.type_label)
    if gold.example.gold_type == "span":
        if gold.span is None:
            raise ContractError(f"{gold.example.id}: span answer has no located gold span")
        start, end = gold.span
        total = total + _cross_entropy(pred.start_logits, start) + _cross_entropy(pred.end_logits, end)
    return total


def count_params(model: Module) -> "OrderedDict[str, int]":
    """Trainable scalar count per top-level component, plus ``total``."""
    report: OrderedDict[str, int] = OrderedDict()
    for name, p in model.named_parameters():
        key = ".".join(name.split(".")[:2])
        report[key] = report.get(key, 0) + p.size
    report["total"] = sum(v for k, v in report.items())
    return report


def format_param_report(report: dict) -> str:
    width = max(len(k) for k in report)
    lines = [f"{k:<{width}}  {v:>12,d}" for k, v in report.items() if k != "total"]
    lines.append(f"{'total':<{width}}  {report['total']:>12,d}")
    return "\n".join(lines)
