from __future__ import annotations

from dataclasses import asdict, dataclass

from gqa.errors import ContractError


@dataclass(frozen=True)
class ModelConfig:
    """Layer sizes. ``hidden`` is the per-direction size of every BiLSTM."""

    emb_dim: int = 100
    char_emb_dim: int = 8
    char_dim: int = 50
    hidden: int = 75
    ggnn_steps: int = 3
    ggnn_hidden: int | None = None
    pool_dim: int | None = None
    readout: str = "average"
    candidate: str = "tanh"

    def __post_init__(self):
        for name in ("emb_dim", "char_emb_dim", "char_dim", "hidden"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")
        if self.ggnn_steps < 0:
            raise ContractError("ggnn_steps must be >= 0")

    @property
    def sent_dim(self) -> int:
        return 2 * self.hidden

    @property
    def encoder_graph_dim(self) -> int:
        return max(self.sent_dim, self.ggnn_hidden or 0)

    @property
    def enriched_dim(self) -> int:
        # BiLSTM4 output + supporting head + start head + end head
        return 4 * self.sent_dim

    @property
    def type_graph_dim(self) -> int:
        return max(self.enriched_dim, self.ggnn_hidden or 0)

    @property
    def readout_dim(self) -> int:
        return self.pool_dim or self.sent_dim

    def to_dict(self) -> dict:
        return asdict(self)
