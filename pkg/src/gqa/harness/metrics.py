"""Answer and supporting-fact metrics, following the HotPotQA evaluation conventions."""
from __future__ import annotations

import logging
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from gqa.data import Example, Vocabulary
from gqa.errors import ContractError
from gqa.model import Checkpoint, Decoded, GQAModel

log = logging.getLogger(__name__)

METRIC_KEYS = ("em", "f1", "sp_em", "sp_f1", "joint_em", "joint_f1")
_POLAR = ("yes", "no", "noanswer")
_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and articles, collapse whitespace."""
    text = "".join(ch for ch in text.lower() if ch not in _PUNCT)
    return " ".join(_ARTICLES.sub(" ", text).split())


def answer_scores(predicted: str, gold: str) -> tuple[int, float, float, float]:
    """(em, f1, precision, recall) of one answer string against the gold one."""
    pred_n, gold_n = normalize_answer(predicted), normalize_answer(gold)
    if pred_n == gold_n:
        return 1, 1.0, 1.0, 1.0
    # a polar answer only scores when it is exactly right
    if pred_n in _POLAR or gold_n in _POLAR:
        return 0, 0.0, 0.0, 0.0
    pred_t, gold_t = pred_n.split(), gold_n.split()
    common = sum((Counter(pred_t) & Counter(gold_t)).values())
    if common == 0:
        return 0, 0.0, 0.0, 0.0
    precision = common / len(pred_t)
    recall = common / len(gold_t)
    return 0, 2 * precision * recall / (precision + recall), precision, recall


def em_f1(predicted: str, gold: str) -> tuple[int, float]:
    em, f1, _, _ = answer_scores(predicted, gold)
    return em, f1


def supporting_scores(predicted: Iterable, gold: Iterable) -> tuple[int, float, float, float]:
    """(em, f1, precision, recall) of a predicted supporting-fact set.

    Two empty sets count as a perfect match.
    """
    pred, gold = set(predicted), set(gold)
    if not pred and not gold:
        return 1, 1.0, 1.0, 1.0
    tp = len(pred & gold)
    precision = tp / len(pred) if pred else 0.0
    recall = tp / len(gold) if gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if tp else 0.0
    return int(pred == gold), f1, precision, recall


def joint_scores(answer: tuple, support: tuple) -> tuple[int, float]:
    """Joint EM and F1 from products of the component precisions and recalls."""
    precision = answer[2] * support[2]
    recall = answer[3] * support[3]
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return answer[0] * support[0], f1


@dataclass
class EvalReport:
    em: float
    f1: float
    sp_em: float
    sp_f1: float
    joint_em: float
    joint_f1: float
    records: list[dict] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_KEYS}

    @property
    def type_accuracy(self) -> float:
        if not self.records:
            return 0.0
        return float(np.mean([r["type_correct"] for r in self.records]))


Predictor = Callable[[Example], Decoded]


def model_predictor(
    model: GQAModel, vocab: Vocabulary, lam: float | None = None, threshold: float = 0.5
) -> Predictor:
    def predict(example: Example) -> Decoded:
        return model.predict(example, vocab, mode="eval", lam=lam, threshold=threshold).decoded

    return predict


def score_example(example: Example, decoded: Decoded) -> dict:
    ans = answer_scores(decoded.answer, example.gold_answer)
    sp = supporting_scores(decoded.supporting, example.gold_supporting)
    joint_em, joint_f1 = joint_scores(ans, sp)
    return {
        "id": example.id,
        "answer": decoded.answer,
        "gold_answer": example.gold_answer,
        "type": decoded.answer_type,
        "gold_type": example.gold_type,
        "type_correct": decoded.answer_type == example.gold_type,
        "supporting": sorted(list(x) for x in decoded.supporting),
        "em": ans[0],
        "f1": ans[1],
        "sp_em": sp[0],
        "sp_f1": sp[1],
        "joint_em": joint_em,
        "joint_f1": joint_f1,
    }


def evaluate(
    source: GQAModel | Checkpoint | Predictor,
    examples: Sequence[Example],
    vocab: Vocabulary | None = None,
    lam: float | None = None,
    threshold: float = 0.5,
) -> EvalReport:
    """Eval-mode prediction and scoring over ``examples``, aggregated in input order.

    ``source`` is a model (needs ``vocab``), a checkpoint (uses its own
    vocabulary and test-time lambda unless ``lam`` is given) or any callable
    mapping an Example to a Decoded prediction. Examples the model cannot
    consume are scored as empty predictions.
    """
    if not examples:
        raise ContractError("cannot evaluate an empty example list")
    if isinstance(source, Checkpoint):
        lam = source.lambda_test if lam is None else lam
        predictor = model_predictor(source.model, source.vocab, lam, threshold)
    elif isinstance(source, GQAModel):
        if vocab is None:
            raise ContractError("evaluating a bare model needs a vocabulary")
        predictor = model_predictor(source, vocab, lam, threshold)
    else:
        predictor = source

    records = []
    for ex in examples:
        try:
            decoded = predictor(ex)
        except ContractError as exc:
            log.warning("example %s scored as empty prediction: %s", ex.id, exc)
            decoded = Decoded("", "span", frozenset(), (0, 0))
        records.append(score_example(ex, decoded))
    means = {k: float(np.mean([r[k] for r in records])) for k in METRIC_KEYS}
    return EvalReport(records=records, **means)


def oracle_predictor(example: Example) -> Decoded:
    """Test double that copies the gold labels."""
    return Decoded(example.gold_answer, example.gold_type, example.gold_supporting, (0, 0))


__all__ = [
    "EvalReport",
    "METRIC_KEYS",
    "answer_scores",
    "em_f1",
    "evaluate",
    "joint_scores",
    "model_predictor",
    "normalize_answer",
    "oracle_predictor",
    "score_example",
    "supporting_scores",
]
