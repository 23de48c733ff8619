"""Corpora, tokenization, embedding tables and the synthetic multi-hop generator."""
from __future__ import annotations

import json
import logging
import math
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from gqa.errors import ContractError, IngestionError, ParseError

log = logging.getLogger(__name__)

ANSWER_TYPES = ("span", "yes", "no")

_PUNCT = set(string.punctuation)


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase, split on whitespace, peel punctuation off both ends of each chunk."""
    out: list[str] = []
    for chunk in text.lower().split():
        lead, trail = [], []
        while chunk and chunk[0] in _PUNCT:
            lead.append(chunk[0])
            chunk = chunk[1:]
        while chunk and chunk[-1] in _PUNCT:
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        out.extend(lead)
        if chunk:
            out.append(chunk)
        out.extend(reversed(trail))
    return tuple(out)


@dataclass(frozen=True)
class Document:
    title: str
    sentences: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class Example:
    id: str
    question: tuple[str, ...]
    documents: tuple[Document, ...]
    gold_answer: str
    gold_type: str
    gold_supporting: frozenset[tuple[int, int]]
    question_type: str = "bridge"

    def __post_init__(self):
        if self.gold_type not in ANSWER_TYPES:
            raise ContractError(f"{self.id}: gold_type must be one of {ANSWER_TYPES}, got {self.gold_type!r}")
        for d, s in self.gold_supporting:
            if not (0 <= d < len(self.documents) and 0 <= s < len(self.documents[d].sentences)):
                raise ContractError(f"{self.id}: supporting fact ({d}, {s}) out of range")

    @property
    def sentences(self) -> list[tuple[str, ...]]:
        """All sentences, document-major."""
        return [s for doc in self.documents for s in doc.sentences]

    @property
    def sentence_counts(self) -> list[int]:
        return [len(doc.sentences) for doc in self.documents]


def answer_type_of(answer: str) -> str:
    norm = answer.strip().lower()
    return norm if norm in ("yes", "no") else "span"


def locate_answer(example: Example) -> tuple[int, int, int, int] | None:
    """First occurrence of the answer tokens as (doc, sent, start, end), inclusive.

    Supporting sentences are searched before the rest.
    """
    target = tokenize(example.gold_answer)
    if not target:
        return None
    order = sorted(example.gold_supporting) + [
        (d, s)
        for d, doc in enumerate(example.documents)
        for s in range(len(doc.sentences))
        if (d, s) not in example.gold_supporting
    ]
    n = len(target)
    for d, s in order:
        sent = example.documents[d].sentences[s]
        for i in range(len(sent) - n + 1):
            if sent[i:i + n] == target:
                return d, s, i, i + n - 1
    return None


# HotPotQA JSON ------------------------------------------------------------------------

def _record_to_example(rec: dict) -> Example:
    try:
        rid = str(rec["_id"])
        context = rec["context"]
        facts = rec["supporting_facts"]
        answer = str(rec["answer"])
        question = rec["question"]
    except (KeyError, TypeError) as exc:
        raise IngestionError(f"record {rec.get('_id', '?') if isinstance(rec, dict) else '?'}: missing field {exc}") from None
    documents = tuple(
        Document(str(title), tuple(tokenize(s) for s in sents)) for title, sents in context
    )
    title_index: dict[str, int] = {}
    for i, doc in enumerate(documents):
        title_index.setdefault(doc.title, i)
    supporting = set()
    for title, sent_idx in facts:
        if title not in title_index:
            raise IngestionError(f"record {rid}: supporting fact title {title!r} not among context documents")
        d = title_index[title]
        if not 0 <= int(sent_idx) < len(documents[d].sentences):
            log.warning("record %s: dropping out-of-range supporting fact (%r, %s)", rid, title, sent_idx)
            continue
        supporting.add((d, int(sent_idx)))
    return Example(
        id=rid,
        question=tokenize(question),
        documents=documents,
        gold_answer=answer,
        gold_type=answer_type_of(answer),
        gold_supporting=frozenset(supporting),
        question_type=str(rec.get("type", "bridge")),
    )


def parse_hotpot(raw: bytes | str) -> list[Example]:
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed JSON at byte offset {offset}: {exc.msg}") from None
    if not isinstance(records, list):
        raise ParseError("expected a JSON array of records at byte offset 0")
    return [_record_to_example(r) for r in records]


def load_hotpot_json(path: str | Path) -> list[Example]:
    return parse_hotpot(Path(path).read_bytes())


def example_to_record(ex: Example) -> dict:
    return {
        "_id": ex.id,
        "question": " ".join(ex.question),
        "answer": ex.gold_answer,
        "type": ex.question_type,
        "context": [[doc.title, [" ".join(s) for s in doc.sentences]] for doc in ex.documents],
        "supporting_facts": [[ex.documents[d].title, s] for d, s in sorted(ex.gold_supporting)],
    }


def dumps_hotpot(examples: Iterable[Example]) -> str:
    return json.dumps([example_to_record(e) for e in examples], indent=1, sort_keys=True) + "\n"


def save_hotpot_json(examples: Iterable[Example], path: str | Path) -> None:
    Path(path).write_text(dumps_hotpot(examples), encoding="utf-8")


# Vocabulary / embeddings ------------------------------------------------------------------

class Vocabulary:
    """Token index plus a frozen embedding table.

    Rows ``0..n-1`` are the known tokens; ``unk_index`` and ``pad_index``
    follow. The padding row is all zeros.
    """

    def __init__(self, tokens: Sequence[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or len(tokens) != vectors.shape[0]:
            raise ContractError(f"{len(tokens)} tokens but vector table of shape {vectors.shape}")
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ContractError("duplicate tokens in vocabulary")
        dim = vectors.shape[1]
        unk = vectors.mean(axis=0) if len(vectors) else np.zeros(dim)
        self.unk_index = len(self.tokens)
        self.pad_index = self.unk_index + 1
        self.embeddings = np.vstack([vectors, unk[None, :], np.zeros((1, dim))])
        self.embeddings.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    def lookup(self, token: str) -> int:
        return self.index.get(token, self.unk_index)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, self.unk_index) for t in tokens]

    @classmethod
    def random(cls, tokens: Iterable[str], dim: int, seed: int) -> "Vocabulary":
        """Stand-in for pretrained vectors: seeded Gaussian rows, sorted token order."""
        toks = sorted(set(tokens))
        rng = np.random.default_rng(seed)
        return cls(toks, rng.normal(scale=1.0 / math.sqrt(dim), size=(len(toks), dim)))


def load_pretrained_embeddings(path: str | Path, dim: int) -> Vocabulary:
    tokens: list[str] = []
    rows: list[list[float]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise ParseError(f"{path}: line {lineno}: expected {dim} floats, got {len(parts) - 1}")
            try:
                vec = [float(x) for x in parts[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if parts[0] in seen:
                log.warning("%s: line %d: duplicate token %r ignored", path, lineno, parts[0])
                continue
            seen.add(parts[0])
            tokens.append(parts[0])
            rows.append(vec)
    return Vocabulary(tokens, np.array(rows, dtype=np.float64).reshape(len(rows), dim))


def corpus_tokens(examples: Iterable[Example]) -> set[str]:
    toks: set[str] = set()
    for ex in examples:
        toks.update(ex.question)
        for s in ex.sentences:
            toks.update(s)
    return toks


# Characters ---------------------------------------------------------------------------

CHAR_PAD = 0
CHAR_UNKNOWN = 1
_PRINTABLE = [chr(c) for c in range(32, 127)]
_CHAR_INDEX = {c: i + 2 for i, c in enumerate(_PRINTABLE)}
N_CHARS = len(_PRINTABLE) + 2


def char_ids(token: str) -> list[int]:
    return [_CHAR_INDEX.get(c, CHAR_UNKNOWN) for c in token]


# Synthetic corpus ------------------------------------------------------------------------

def _sentence(rng, fillers) -> tuple[str, ...]:
    n = int(rng.integers(3, 6))
    return tuple(fillers[i] for i in rng.choice(len(fillers), size=n, replace=False)) + (".",)


def _document(rng, title: str, key: tuple[str, ...], fillers) -> tuple[Document, int]:
    n = int(rng.integers(1, 4))
    pos = int(rng.integers(0, n))
    sents = [_sentence(rng, fillers) for _ in range(n)]
    sents[pos] = key
    return Document(title, tuple(sents)), pos


def generate_synthetic(n_examples: int, vocab_size: int, seed: int) -> list[Example]:
    """Two-hop bridge questions with two distractor documents each.

    Document A states ``e1 is linked to e2``, document B states
    ``e2 is located in <answer>``. Every third example asks a yes/no
    question instead of the span question.
    """
    if vocab_size < 20:
        raise ContractError(f"vocab_size must be >= 20, got {vocab_size}")
    if n_examples < 1:
        raise ContractError(f"n_examples must be >= 1, got {n_examples}")
    n_ent = vocab_size // 2
    entities = [f"e{i}" for i in range(n_ent)]
    fillers = [f"w{i}" for i in range(vocab_size - n_ent)]
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_examples):
        e1, e2, ans, x, d1, d2, t1, t2 = (entities[i] for i in rng.choice(n_ent, size=8, replace=False))
        doc_a, pos_a = _document(rng, e1, (e1, "is", "linked", "to", e2, "."), fillers)
        doc_b, pos_b = _document(rng, e2, (e2, "is", "located", "in", ans, "."), fillers)
        dist1, _ = _document(rng, d1, (d1, "is", "linked", "to", t1, "."), fillers)
        dist2, _ = _document(rng, d2, (d2, "is", "located", "in", x, "."), fillers)
        docs = [doc_a, doc_b, dist1, dist2]
        order = [int(i) for i in rng.permutation(4)]
        docs = [docs[i] for i in order]
        ia, ib = order.index(0), order.index(1)
        supporting = frozenset({(ia, pos_a), (ib, pos_b)})
        if k % 3 == 2:
            polar = bool(rng.integers(0, 2))
            target = ans if polar else x
            question = ("is", e1, "linked", "to", "something", "located", "in", target, "?")
            answer = "yes" if polar else "no"
        else:
            question = ("what", "is", e1, "linked", "to", "located", "in", "?")
            answer = ans
        out.append(
            Example(
                id=f"syn-{seed}-{k}",
                question=question,
                documents=tuple(docs),
                gold_answer=answer,
                gold_type=answer_type_of(answer),
                gold_supporting=supporting,
            )
        )
    return out


# Splits --------------------------------------------------------------------------------------

def split(
    examples: Sequence[Example], ratios: tuple[float, float, float] = (0.9, 0.05, 0.05), seed: int = 0
) -> tuple[list[Example], list[Example], list[Example]]:
    """Seeded shuffle then contiguous train/dev/test partition.

    Dev and test sizes are floored; the remainder goes to train.
    """
    if not examples:
        raise ContractError("cannot split an empty example list")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ContractError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ContractError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(examples)
    # epsilon guards floor() against products like 0.29*100 = 28.999...
    n_dev = math.floor(n * ratios[1] + 1e-9)
    n_test = math.floor(n * ratios[2] + 1e-9)
    n_train = n - n_dev - n_test
    perm = np.random.default_rng(seed).permutation(n)
    shuffled = [examples[i] for i in perm]
    return shuffled[:n_train], shuffled[n_train:n_train + n_dev], shuffled[n_train + n_dev:]
