"""Training configuration and its flat ``key = value`` file format."""
from __future__ import annotations

import types
import typing
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from gqa.errors import ContractError, ParseError
from gqa.model import ModelConfig
from gqa.topology import LAMBDA_EVAL, LAMBDA_TRAIN

OPTIMIZERS = ("sgd", "adam")
SCHEDULES = ("constant", "cosine")


@dataclass(frozen=True)
class TrainConfig:
    # model dimensions
    emb_dim: int = 100
    char_emb_dim: int = 8
    char_dim: int = 50
    hidden: int = 75
    steps: int = 3
    ggnn_hidden: int | None = None
    pool_dim: int | None = None
    readout: str = "average"
    candidate: str = "tanh"
    # topology
    lambda_train: float = LAMBDA_TRAIN
    lambda_test: float = LAMBDA_EVAL
    # optimization
    optimizer: str = "sgd"
    lr: float = 0.1
    lr_schedule: str = "constant"
    clip_norm: float = 5.0
    batch_size: int = 8
    epochs: int = 10
    seed: int = 0
    w_sp: float = 1.0
    w_type: float = 1.0
    sp_threshold: float = 0.5
    # paths
    train_path: str | None = None
    dev_path: str | None = None
    embeddings_path: str | None = None
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.lambda_train < 0 or self.lambda_test < 0:
            raise ContractError("lambda_train and lambda_test must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise ContractError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.lr_schedule not in SCHEDULES:
            raise ContractError(f"lr_schedule must be one of {SCHEDULES}, got {self.lr_schedule!r}")
        for name in ("batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.lr <= 0 or self.clip_norm <= 0:
            raise ContractError("lr and clip_norm must be positive")
        self.model_config()  # validates the dimensions

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            emb_dim=self.emb_dim,
            char_emb_dim=self.char_emb_dim,
            char_dim=self.char_dim,
            hidden=self.hidden,
            ggnn_steps=self.steps,
            ggnn_hidden=self.ggnn_hidden,
            pool_dim=self.pool_dim,
            readout=self.readout,
            candidate=self.candidate,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def updated(self, **overrides) -> "TrainConfig":
        """Copy with the non-None overrides applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


_HINTS = typing.get_type_hints(TrainConfig)


def _base_type(hint) -> tuple[type, bool]:
    """(scalar type, optional?) for a field annotation."""
    args = typing.get_args(hint)
    if isinstance(hint, types.UnionType) or typing.get_origin(hint) is typing.Union:
        inner = [a for a in args if a is not type(None)]
        return inner[0], True
    return hint, False


def coerce(key: str, raw: str):
    """Convert a config-file string to the field's type."""
    if key not in _HINTS:
        raise ParseError(f"unknown config key {key!r}")
    kind, optional = _base_type(_HINTS[key])
    text = raw.strip()
    if optional and text.lower() in ("", "none", "null"):
        return None
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError as exc:
        raise ParseError(f"config key {key!r}: cannot read {text!r} as {kind.__name__}") from exc
    return text


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines. Blank lines and ``#`` comments are skipped."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"{source}:{lineno}: expected 'key = value', got {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _HINTS:
            raise ParseError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ParseError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = coerce(key, value)
    return values


def load_config(path: str | Path | None = None, **overrides) -> TrainConfig:
    """Defaults, then the file's values, then non-None ``overrides``."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"cannot read config file {path}: {exc}") from exc
        values = parse_config_text(text, str(path))
    unknown = set(overrides) - {f.name for f in fields(TrainConfig)}
    if unknown:
        raise ParseError(f"unknown config keys {sorted(unknown)}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values)


def dumps_config(config: TrainConfig) -> str:
    lines = []
    for key, value in config.to_dict().items():
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"
