"""Versioned binary checkpoints.

Layout::

    b"GQACKPT\\n"                 8-byte magic
    uint32 little-endian          format version
    uint64 little-endian          header length in bytes
    header                        UTF-8 JSON, keys sorted
    blocks                        raw little-endian float64, one per entry of
                                  header["blocks"], in declaration order

The last block is the vocabulary's known-token embedding table. The JSON
header is written with sorted keys and no timestamps, so identical models
serialize to identical bytes.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gqa.data import Vocabulary
from gqa.errors import CheckpointError, ContractError
from gqa.model.config import ModelConfig
from gqa.model.network import GQAModel
from gqa.topology import LAMBDA_EVAL, LAMBDA_TRAIN

MAGIC = b"GQACKPT\n"
FORMAT_VERSION = 1
VOCAB_BLOCK = "vocab.embeddings"
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    model: GQAModel
    vocab: Vocabulary
    lambda_train: float = LAMBDA_TRAIN
    lambda_test: float = LAMBDA_EVAL
    extra: dict = field(default_factory=dict)

    @property
    def config(self) -> ModelConfig:
        return self.model.config


def _header(ckpt: Checkpoint) -> dict:
    model, vocab = ckpt.model, ckpt.vocab
    blocks = [{"name": name, "shape": list(p.shape)} for name, p in model.named_parameters()]
    blocks.append({"name": VOCAB_BLOCK, "shape": [len(vocab.tokens), vocab.dim]})
    return {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "ggnn_steps": model.config.ggnn_steps,
        "lambda_train": ckpt.lambda_train,
        "lambda_test": ckpt.lambda_test,
        "seed": model.seed,
        "vocab_tokens": vocab.tokens,
        "blocks": blocks,
        "extra": ckpt.extra,
    }


def dumps_checkpoint(ckpt: Checkpoint) -> bytes:
    if ckpt.vocab.dim != ckpt.model.config.emb_dim:
        raise ContractError(f"vocabulary dim {ckpt.vocab.dim} != model emb_dim {ckpt.model.config.emb_dim}")
    header = json.dumps(_header(ckpt), sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<IQ", FORMAT_VERSION, len(header)))
    out.write(header)
    for p in ckpt.model.parameters():
        out.write(np.ascontiguousarray(p.data, dtype=_DTYPE).tobytes())
    known = ckpt.vocab.embeddings[: len(ckpt.vocab.tokens)]
    out.write(np.ascontiguousarray(known, dtype=_DTYPE).tobytes())
    return out.getvalue()


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps_checkpoint(ckpt))
    tmp.replace(path)


def _check_expected(config: ModelConfig, expected: ModelConfig | None) -> None:
    if expected is None:
        return
    got, want = config.to_dict(), expected.to_dict()
    diffs = [f"{k}: checkpoint {got[k]!r}, expected {want[k]!r}" for k in want if got.get(k) != want[k]]
    if diffs:
        raise CheckpointError("checkpoint dimensions do not match: " + "; ".join(diffs))


def loads_checkpoint(raw: bytes, expected: ModelConfig | None = None) -> Checkpoint:
    """Parse checkpoint bytes; ``expected`` rejects a checkpoint built with other dimensions."""
    fixed = len(MAGIC) + 12
    if len(raw) < fixed or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, header_len = struct.unpack("<IQ", raw[len(MAGIC): fixed])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version}")
    try:
        header = json.loads(raw[fixed: fixed + header_len].decode("utf-8"))
        config = ModelConfig(**header["config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    _check_expected(config, expected)

    model = GQAModel(config, seed=int(header["seed"]))
    named = list(model.named_parameters())
    blocks = header["blocks"]
    if len(blocks) != len(named) + 1:
        raise CheckpointError(f"checkpoint holds {len(blocks)} blocks, model needs {len(named) + 1}")
    offset = fixed + header_len
    arrays = []
    for block, declared in zip(blocks, [n for n, _ in named] + [VOCAB_BLOCK]):
        if block["name"] != declared:
            raise CheckpointError(f"block {block['name']!r} found where {declared!r} was expected")
        shape = tuple(block["shape"])
        size = int(np.prod(shape, dtype=np.int64)) * _DTYPE.itemsize
        if offset + size > len(raw):
            raise CheckpointError(f"checkpoint truncated inside block {declared!r}")
        arrays.append(np.frombuffer(raw, dtype=_DTYPE, count=size // _DTYPE.itemsize, offset=offset).reshape(shape))
        offset += size
    if offset != len(raw):
        raise CheckpointError(f"{len(raw) - offset} trailing bytes after the last block")

    for (name, p), arr in zip(named, arrays):
        if arr.shape != p.shape:
            raise CheckpointError(f"parameter {name}: checkpoint shape {arr.shape}, model shape {p.shape}")
        p.data = arr.astype(np.float64, copy=True)
    vocab_table = arrays[-1]
    if vocab_table.shape[1] != config.emb_dim or vocab_table.shape[0] != len(header["vocab_tokens"]):
        raise CheckpointError(
            f"vocabulary table {vocab_table.shape} does not fit {len(header['vocab_tokens'])} tokens "
            f"of dim {config.emb_dim}"
        )
    vocab = Vocabulary(header["vocab_tokens"], vocab_table.copy())
    return Checkpoint(
        model=model,
        vocab=vocab,
        lambda_train=float(header["lambda_train"]),
        lambda_test=float(header["lambda_test"]),
        extra=header.get("extra", {}),
    )


def load_checkpoint(path: str | Path, expected: ModelConfig | None = None) -> Checkpoint:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return loads_checkpoint(raw, expected)
