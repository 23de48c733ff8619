"""Turn an Example into the constant arrays the network consumes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gqa.data import ANSWER_TYPES, Example, Vocabulary, char_ids, locate_answer
from gqa.errors import ContractError
from gqa.model.layers import SentenceIndex, char_windows
from gqa.topology import (
    DocLayout,
    TopologyMatrix,
    build_adjacency,
    build_base_links,
    cosine_similarity_matrix,
    sentence_vectors,
)


@dataclass
class Prepared:
    example: Example
    layout: DocLayout
    index: SentenceIndex
    q_index: SentenceIndex
    words: list[str]
    word_emb: np.ndarray
    q_emb: np.ndarray
    char_windows: np.ndarray
    char_mask: np.ndarray
    B: np.ndarray
    L: np.ndarray
    S: np.ndarray
    sp_labels: np.ndarray
    type_label: int
    span: tuple[int, int] | None

    @property
    def n_words(self) -> int:
        return self.index.n_words

    @property
    def n_sent(self) -> int:
        return self.index.n_sent

    def topology(self, lam: float) -> TopologyMatrix:
        return build_adjacency(self.B, self.S, self.L, lam)


def prepare(example: Example, vocab: Vocabulary, require_span: bool = True) -> Prepared:
    """Precompute embeddings, character windows, topology parts and gold targets.

    Raises ContractError for empty sentences or, when ``require_span`` is set,
    for a span answer that cannot be found in the context.
    """
    sentences = example.sentences
    if not example.question:
        raise ContractError(f"{example.id}: empty question")
    for i, s in enumerate(sentences):
        if not s:
            raise ContractError(f"{example.id}: sentence {i} is empty")
    layout = DocLayout(example.sentence_counts)
    lengths = [len(s) for s in sentences]
    words = [w for s in sentences for w in s]
    q = list(example.question)
    windows, mask = char_windows([char_ids(w) for w in words + q])

    B, L = build_base_links(layout)
    S = cosine_similarity_matrix(sentence_vectors(sentences, vocab))

    sp = np.zeros(layout.n_sent)
    for d, s in example.gold_supporting:
        sp[layout.index(d, s)] = 1.0
    span = None
    if example.gold_type == "span":
        loc = locate_answer(example)
        if loc is None:
            if require_span:
                raise ContractError(f"{example.id}: answer {example.gold_answer!r} not found in context")
        else:
            d, s, a, b = loc
            base = int(np.sum(lengths[: layout.index(d, s)]))
            span = (base + a, base + b)
    return Prepared(
        example=example,
        layout=layout,
        index=SentenceIndex(lengths),
        q_index=SentenceIndex([len(q)]),
        words=words,
        word_emb=vocab.embeddings[vocab.ids(words)],
        q_emb=vocab.embeddings[vocab.ids(q)],
        char_windows=windows,
        char_mask=mask,
        B=B,
        L=L,
        S=S,
        sp_labels=sp,
        type_label=ANSWER_TYPES.index(example.gold_type),
        span=span,
    )
