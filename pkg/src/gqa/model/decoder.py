"""Cascaded heads: supporting sentences, answer start, answer end, answer type.

Each of the first three heads concatenates its hidden output onto the word
and sentence states it received, so later heads see everything earlier
heads computed.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from gqa.ggnn import GGNNParams, attention_pool, propagate
from gqa.model.config import ModelConfig
from gqa.model.encoder import ContextState
from gqa.model.layers import BiLSTM
from gqa.nn import Linear, Module, uniform
from gqa.numerics import Tensor, ops


class DecoderParams(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        H, d = cfg.hidden, cfg.sent_dim
        self.sp_hidden = Linear(d, d, rng)
        self.sp_out = Linear(d, 1, rng)
        self.start_lstm = BiLSTM(2 * d, H, rng, init_dim=2 * d)
        # no bias: a constant shift of all word logits cancels in the softmax
        self.start_out = uniform(rng, (d, 1), d, "start_out")
        self.end_lstm = BiLSTM(3 * d, H, rng, init_dim=3 * d)
        self.end_out = uniform(rng, (d, 1), d, "end_out")
        self.type_graph = GGNNParams(
            cfg.enriched_dim,
            cfg.type_graph_dim,
            rng,
            n_steps=cfg.ggnn_steps,
            d_out=cfg.readout_dim,
            readout=cfg.readout,
            candidate=cfg.candidate,
        )
        self.type_out = Linear(cfg.readout_dim, 3, rng)


def _grow(ctx: ContextState, word_part: Tensor, sent_part: Tensor) -> ContextState:
    return replace(
        ctx,
        h_word=ops.concat([ctx.h_word, word_part], axis=1),
        h_sent=ops.concat([ctx.h_sent, sent_part], axis=1),
    )


def decode_supporting(ctx: ContextState, params: DecoderParams) -> tuple[Tensor, ContextState]:
    n = ctx.h_sent.shape[0]
    hidden = ops.tanh(params.sp_hidden(ctx.h_sent))
    logits = params.sp_out(hidden)
    contribution = ops.broadcast(ops.sigmoid(logits), hidden.shape) * hidden
    per_word = ops.take(contribution, ctx.sent_of_word)
    return ops.reshape(logits, (n,)), _grow(ctx, per_word, contribution)


def _span_head(ctx: ContextState, lstm: BiLSTM, out: Tensor) -> tuple[Tensor, ContextState]:
    words, finals = lstm(ctx.h_word, ctx.index, init=ctx.h_sent)
    logits = ops.reshape(ops.matmul(words, out), (words.shape[0],))
    return logits, _grow(ctx, words, finals)


def decode_span(ctx: ContextState, params: DecoderParams) -> tuple[Tensor, Tensor, ContextState]:
    start, ctx = _span_head(ctx, params.start_lstm, params.start_out)
    end, ctx = _span_head(ctx, params.end_lstm, params.end_out)
    return start, end, ctx


def decode_type(ctx: ContextState, params: DecoderParams) -> Tensor:
    states = propagate(ctx.h_sent, ctx.topology, params.type_graph)
    pooled = attention_pool(states, ctx.h_sent, params.type_graph)
    return ops.reshape(params.type_out(ops.reshape(pooled, (1, -1))), (3,))


def best_span(start_logits: np.ndarray, end_logits: np.ndarray, sent_of_word: np.ndarray) -> tuple[int, int]:
    """Highest start+end score over pairs with start <= end inside one sentence."""
    best, best_score = (0, 0), -np.inf
    for s in np.unique(sent_of_word):
        idx = np.flatnonzero(sent_of_word == s)
        scores = start_logits[idx][:, None] + end_logits[idx][None, :]
        scores = np.where(np.triu(np.ones_like(scores, dtype=bool)), scores, -np.inf)
        flat = int(np.argmax(scores))
        i, j = divmod(flat, len(idx))
        if scores[i, j] > best_score:
            best_score, best = scores[i, j], (int(idx[i]), int(idx[j]))
    return best
