"""Mini-batch training with deterministic shuffling, clipping and checkpointing."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from gqa.data import Example, Vocabulary, corpus_tokens, load_hotpot_json, load_pretrained_embeddings
from gqa.errors import ContractError, NumericError, TrainingError
from gqa.harness.config import TrainConfig
from gqa.harness.metrics import EvalReport, evaluate
from gqa.model import Checkpoint, GQAModel, Prepared, loss, prepare, save_checkpoint
from gqa.numerics import Tape, Tensor, backward

log = logging.getLogger(__name__)


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads))


def clip_by_global_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return grads, norm


class SGD:
    def __init__(self, params: Sequence[Tensor], lr: float):
        self.params, self.lr = list(params), lr

    def step(self, grads: Sequence[np.ndarray], lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        for p, g in zip(self.params, grads):
            p.data = p.data - lr * g


class Adam:
    """Adam with bias-corrected first and second moments."""

    def __init__(self, params: Sequence[Tensor], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params, self.lr = list(params), lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: Sequence[np.ndarray], lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * g * g
            p.data = p.data - lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)


def make_optimizer(config: TrainConfig, params: Sequence[Tensor]):
    return Adam(params, config.lr) if config.optimizer == "adam" else SGD(params, config.lr)


def learning_rate(config: TrainConfig, epoch: int) -> float:
    """Learning rate for a 0-based epoch."""
    if config.lr_schedule == "cosine":
        return config.lr * 0.5 * (1.0 + math.cos(math.pi * epoch / config.epochs))
    return config.lr


@dataclass
class EpochLog:
    epoch: int
    loss: float
    grad_norm: float
    dev: dict | None = None
    seconds: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "loss": self.loss, "grad_norm": self.grad_norm, "dev": self.dev}


@dataclass
class TrainResult:
    model: GQAModel
    vocab: Vocabulary
    history: list[EpochLog]
    best_dev_f1: float | None = None
    best_epoch: int | None = None
    skipped: list[str] = field(default_factory=list)

    def checkpoint(self, config: TrainConfig, **extra) -> Checkpoint:
        return Checkpoint(self.model, self.vocab, config.lambda_train, config.lambda_test, extra)


def build_vocab(config: TrainConfig, examples: Sequence[Example]) -> Vocabulary:
    """Pretrained table when a path is configured, otherwise seeded random vectors."""
    if config.embeddings_path:
        return load_pretrained_embeddings(config.embeddings_path, config.emb_dim)
    return Vocabulary.random(corpus_tokens(examples), config.emb_dim, config.seed)


def prepare_all(examples: Sequence[Example], vocab: Vocabulary) -> tuple[list[Prepared], list[str]]:
    """Prepare every example; ones that cannot be trained on are skipped with a warning."""
    prepared, skipped = [], []
    for ex in examples:
        try:
            prepared.append(prepare(ex, vocab, require_span=True))
        except ContractError as exc:
            log.warning("skipping example %s: %s", ex.id, exc)
            skipped.append(ex.id)
    return prepared, skipped


def batch_gradients(
    model: GQAModel, batch: Sequence[Prepared], config: TrainConfig, batch_id: str
) -> tuple[float, list[np.ndarray]]:
    """Mean loss and mean gradients over a batch, reduced in batch order."""
    params = model.parameters()
    total = [np.zeros_like(p.data) for p in params]
    losses = 0.0
    for prep in batch:
        try:
            with Tape() as tape:
                value = loss(model.forward(prep, mode="train", lam=config.lambda_train), prep, (config.w_sp, config.w_type))
        except NumericError as exc:
            raise TrainingError(f"non-finite value in batch {batch_id} (example {prep.example.id}): {exc}") from exc
        if not math.isfinite(value.item()):
            raise TrainingError(f"non-finite loss in batch {batch_id} (example {prep.example.id})")
        grads = backward(tape, value, params)
        for acc, p in zip(total, params):
            acc += grads[p].data
        losses += value.item()
    n = len(batch)
    return losses / n, [g / n for g in total]


def train(
    config: TrainConfig,
    train_examples: Sequence[Example] | None = None,
    dev_examples: Sequence[Example] | None = None,
    vocab: Vocabulary | None = None,
) -> TrainResult:
    """Train a model from ``config``; examples default to the configured paths.

    Each epoch writes ``epoch-NNN.ckpt`` and, when dev data is present and
    answer F1 improves, ``best.ckpt`` into ``config.checkpoint_dir``. The
    per-epoch log goes to ``train_log.json`` next to them.
    """
    if train_examples is None:
        if not config.train_path:
            raise ContractError("no training examples and no train_path configured")
        train_examples = load_hotpot_json(config.train_path)
    if dev_examples is None and config.dev_path:
        dev_examples = load_hotpot_json(config.dev_path)
    dev_examples = list(dev_examples or [])
    if vocab is None:
        vocab = build_vocab(config, list(train_examples) + dev_examples)
    prepared, skipped = prepare_all(train_examples, vocab)
    if not prepared:
        raise TrainingError("no usable training examples")

    model = GQAModel(config.model_config(), seed=config.seed)
    params = model.parameters()
    optimizer = make_optimizer(config, params)
    rng = np.random.default_rng(config.seed)
    out_dir = Path(config.checkpoint_dir) if config.checkpoint_dir else None
    result = TrainResult(model, vocab, [], skipped=skipped)

    for epoch in range(config.epochs):
        started = time.perf_counter()
        lr = learning_rate(config, epoch)
        order = rng.permutation(len(prepared))
        losses, norms = [], []
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            batch = [prepared[i] for i in order[start: start + config.batch_size]]
            value, grads = batch_gradients(model, batch, config, f"{epoch + 1}:{b}")
            grads, norm = clip_by_global_norm(grads, config.clip_norm)
            optimizer.step(grads, lr)
            losses.append(value * len(batch))
            norms.append(norm)
        entry = EpochLog(epoch + 1, sum(losses) / len(prepared), float(np.mean(norms)))
        report: EvalReport | None = None
        if dev_examples:
            report = evaluate(model, dev_examples, vocab, lam=config.lambda_test, threshold=config.sp_threshold)
            entry.dev = report.to_dict()
        entry.seconds = time.perf_counter() - started
        result.history.append(entry)
        log.info("epoch %d loss %.6f grad_norm %.4f dev %s (%.1fs)", entry.epoch, entry.loss, entry.grad_norm, entry.dev, entry.seconds)

        improved = report is not None and (result.best_dev_f1 is None or report.f1 > result.best_dev_f1)
        if improved:
            result.best_dev_f1, result.best_epoch = report.f1, epoch + 1
        if out_dir is not None:
            ckpt = result.checkpoint(config, epoch=epoch + 1)
            save_checkpoint(ckpt, out_dir / f"epoch-{epoch + 1:03d}.ckpt")
            if improved:
                save_checkpoint(ckpt, out_dir / "best.ckpt")
            log_path = out_dir / "train_log.json"
            log_path.write_text(json.dumps([h.to_dict() for h in result.history], indent=1) + "\n", encoding="utf-8")
    return result
