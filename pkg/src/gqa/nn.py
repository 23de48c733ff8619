"""Parameter containers and the basic layers shared by the graph and text models."""
from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from gqa.numerics import Parameter, Tensor, ops


class Module:
    """Anything holding parameters.

    Parameters are discovered from instance attributes in assignment order,
    which fixes the declaration order used for checkpoints.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def uniform(rng: np.random.Generator, shape, fan: int, name: str | None = None) -> Tensor:
    bound = 1.0 / math.sqrt(max(fan, 1))
    return Parameter(rng.uniform(-bound, bound, size=shape), name=name)


def zeros(shape, name: str | None = None) -> Tensor:
    return Parameter(np.zeros(shape), name=name)


class Linear(Module):
    """``y = x @ weight + bias`` on the last axis."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.d_in, self.d_out = d_in, d_out
        self.weight = uniform(rng, (d_in, d_out), d_in, "weight")
        self.bias = zeros((d_out,), "bias")

    def __call__(self, x: Tensor) -> Tensor:
        return ops.matmul(x, self.weight) + self.bias
