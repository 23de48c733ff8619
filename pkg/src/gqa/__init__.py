"""gqa: graph-enriched multi-document question answering on a small autodiff core."""

__version__ = "0.1.0"
