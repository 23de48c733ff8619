"""Disjoint sentence encoding, query enrichment and graph enrichment."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gqa.ggnn import GGNNParams, propagate
from gqa.model.config import ModelConfig
from gqa.model.inputs import Prepared, prepare
from gqa.model.layers import BiAttention, BiLSTM, CharCNN, SelfAttention, SentenceIndex
from gqa.nn import Module
from gqa.numerics import Tensor, ops
from gqa.topology import DocLayout, TopologyMatrix, default_lambda


class EncoderParams(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        H, d_word = cfg.hidden, cfg.emb_dim + cfg.char_dim
        self.char_cnn = CharCNN(cfg.char_emb_dim, cfg.char_dim, rng)
        self.word_lstm = BiLSTM(d_word, H, rng)
        self.question_lstm = BiLSTM(d_word, H, rng)
        self.bi_attention = BiAttention(2 * H, rng)
        self.self_attention = SelfAttention(2 * H, rng)
        self.sentence_lstm = BiLSTM(2 * H, H, rng)
        self.graph = GGNNParams(
            2 * H, cfg.encoder_graph_dim, rng, n_steps=cfg.ggnn_steps, candidate=cfg.candidate
        )
        self.graph_lstm = BiLSTM(2 * H, H, rng, init_dim=cfg.encoder_graph_dim)


@dataclass
class ContextState:
    h_word: Tensor
    h_sent: Tensor
    layout: DocLayout
    topology: TopologyMatrix
    index: SentenceIndex

    @property
    def sent_of_word(self) -> np.ndarray:
        return self.index.sent_of_word


def encode(example, vocab, params: EncoderParams, mode: str = "train", lam: float | None = None) -> ContextState:
    """Run the encoder on one example (or an already prepared one).

    ``lam`` overrides the mode's default similarity weight.
    """
    prep = example if isinstance(example, Prepared) else prepare(example, vocab, require_span=False)
    lam = default_lambda(mode) if lam is None else lam
    n_words = prep.n_words

    chars = params.char_cnn(prep.char_windows, prep.char_mask)
    word_in = ops.concat([Tensor(prep.word_emb), chars[:n_words]], axis=1)
    q_in = ops.concat([Tensor(prep.q_emb), chars[n_words:]], axis=1)

    context, _ = params.word_lstm(word_in, prep.index)
    question, _ = params.question_lstm(q_in, prep.q_index)

    enriched = params.bi_attention(context, question)
    summed = enriched + params.self_attention(enriched)

    words3, sent_emb = params.sentence_lstm(summed, prep.index)
    topology = prep.topology(lam)
    graph_out = propagate(sent_emb, topology, params.graph)
    h_word, h_sent = params.graph_lstm(words3, prep.index, init=graph_out)
    return ContextState(h_word, h_sent, prep.layout, topology, prep.index)
