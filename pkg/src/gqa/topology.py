"""Sentence-level document topology.

The adjacency used by the graph layers is ``M = 0.5 * X.T @ X`` with
``X = B + lam * S + L``, where ``B`` links each sentence to the next one in
its document, ``L`` links the last sentence of every document to the first
sentence of every other document, and ``S`` is the cosine similarity between
sentence vectors with its diagonal zeroed.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from gqa.errors import ContractError, DimensionError

log = logging.getLogger(__name__)

LAMBDA_TRAIN = 0.5
LAMBDA_EVAL = 0.05


def default_lambda(mode: str) -> float:
    if mode == "train":
        return LAMBDA_TRAIN
    if mode == "eval":
        return LAMBDA_EVAL
    raise ContractError(f"mode must be 'train' or 'eval', got {mode!r}")


class DocLayout:
    """Maps (document, sentence) pairs to contiguous document-major indices."""

    def __init__(self, sentence_counts: Sequence[int]):
        if not sentence_counts:
            raise ContractError("layout needs at least one document")
        if any(c < 1 for c in sentence_counts):
            raise ContractError(f"every document needs at least one sentence, got counts {list(sentence_counts)}")
        self.sentence_counts = [int(c) for c in sentence_counts]
        self.offsets = np.concatenate([[0], np.cumsum(self.sentence_counts)]).astype(int)
        self.n_sent = int(self.offsets[-1])

    def index(self, doc: int, sent: int) -> int:
        if not 0 <= sent < self.sentence_counts[doc]:
            raise IndexError(f"sentence {sent} out of range for document {doc}")
        return int(self.offsets[doc] + sent)

    def firsts(self) -> list[int]:
        return [int(o) for o in self.offsets[:-1]]

    def lasts(self) -> list[int]:
        return [int(o) - 1 for o in self.offsets[1:]]

    def doc_of(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.sentence_counts)), self.sentence_counts)


@dataclass(frozen=True)
class TopologyMatrix:
    M: np.ndarray
    B: np.ndarray
    S: np.ndarray
    L: np.ndarray
    lam: float

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {"lambda": self.lam, "M": self.M.tolist(), "B": self.B.tolist(), "S": self.S.tolist(), "L": self.L.tolist()},
        )


def cosine_similarity_matrix(vectors: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity with a zero diagonal. Zero rows give zero similarity."""
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim != 2:
        raise DimensionError(f"cosine_similarity_matrix: expected a 2-D array, got shape {v.shape}")
    norms = np.linalg.norm(v, axis=1)
    zero = norms == 0
    if zero.any():
        log.warning("cosine similarity: %d zero-norm sentence vector(s); their similarities set to 0", int(zero.sum()))
    unit = np.divide(v, norms[:, None], out=np.zeros_like(v), where=~zero[:, None])
    S = unit @ unit.T
    np.fill_diagonal(S, 0.0)
    return S


def build_base_links(layout: DocLayout) -> tuple[np.ndarray, np.ndarray]:
    """Within-document next-sentence links ``B`` and last-to-first document links ``L``."""
    n = layout.n_sent
    B = np.zeros((n, n))
    for start, count in zip(layout.firsts(), layout.sentence_counts):
        for i in range(start, start + count - 1):
            B[i, i + 1] = 1.0
    L = np.zeros((n, n))
    firsts, lasts = layout.firsts(), layout.lasts()
    for p, last in enumerate(lasts):
        for q, first in enumerate(firsts):
            if p != q:
                L[last, first] = 1.0
    return B, L


def build_adjacency(B: np.ndarray, S: np.ndarray, L: np.ndarray, lam: float) -> TopologyMatrix:
    B, S, L = (np.asarray(m, dtype=np.float64) for m in (B, S, L))
    n = B.shape[0] if B.ndim == 2 else -1
    for name, m in (("B", B), ("S", S), ("L", L)):
        if m.shape != (n, n):
            raise DimensionError(f"build_adjacency: {name} has shape {m.shape}, expected ({n}, {n}) square")
    if lam < 0:
        raise ContractError(f"lambda must be >= 0, got {lam}")
    X = B + lam * S + L
    return TopologyMatrix(M=0.5 * X.T @ X, B=B, S=S, L=L, lam=float(lam))


def sentence_vectors(sentences: Sequence[Sequence[str]], vocab) -> np.ndarray:
    """Mean pretrained embedding of each sentence's tokens."""
    rows = [vocab.embeddings[vocab.ids(s)].mean(axis=0) if len(s) else np.zeros(vocab.dim) for s in sentences]
    return np.array(rows).reshape(len(rows), vocab.dim)


def example_topology(example, vocab, lam: float) -> tuple[DocLayout, TopologyMatrix]:
    layout = DocLayout(example.sentence_counts)
    B, L = build_base_links(layout)
    S = cosine_similarity_matrix(sentence_vectors(example.sentences, vocab))
    return layout, build_adjacency(B, S, L, lam)
