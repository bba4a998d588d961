"""Parameter containers for networks built on :class:`Tensor`."""

from __future__ import annotations

import math
from collections.abc import Iterator, Mapping
from typing import Any

import numpy as np

from ..core.errors import CheckpointError
from .tensor import PRECISIONS, Tensor, default_dtype


def parameter(values: np.ndarray, *, name: str | None = None) -> Tensor:
    """Create a trainable leaf tensor in the current precision."""
    return Tensor(values, requires_grad=True, dtype=default_dtype(), name=name)


def normal_init(rng: np.random.Generator, shape: tuple[int, ...], std: float) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


def kaiming_std(fan_in: int, slope: float = 0.01) -> float:
    """He-normal standard deviation for leaky-ReLU networks."""
    return math.sqrt(2.0 / ((1.0 + slope**2) * fan_in))


def small_init_std(dim: int) -> float:
    """Standard deviation of the "small init" scheme: ``sqrt(2 / (5 * dim))``."""
    return math.sqrt(2.0 / (5.0 * dim))


def wang_init_std(dim: int, num_layers: int) -> float:
    return 2.0 / num_layers / math.sqrt(dim)


class Module:
    """Base class that discovers parameters among instance attributes.

    Attributes holding trainable tensors, sub-modules, or lists of sub-modules are
    walked in definition order, which makes parameter names and ordering stable.
    """

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{full}.")
            elif isinstance(value, list | tuple):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grads(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], *, strict: bool = True) -> None:
        """Copy arrays into parameters by name.

        With ``strict`` every parameter must be present and no extra names allowed.
        Shape mismatches always fail, listing each offending name.
        """
        own = dict(self.named_parameters())
        problems: list[str] = []
        if strict:
            problems += [f"missing {name}" for name in own if name not in state]
            problems += [f"unexpected {name}" for name in state if name not in own]
        for name, array in state.items():
            if name in own and tuple(np.shape(array)) != own[name].shape:
                problems.append(
                    f"{name}: checkpoint {tuple(np.shape(array))} != model {own[name].shape}"
                )
        if problems:
            raise CheckpointError("State does not match model: " + "; ".join(problems))
        for name, array in state.items():
            if name in own:
                own[name].data[...] = np.asarray(array, dtype=own[name].dtype)

    def to_precision(self, name: str) -> None:
        """Cast every parameter to ``"float32"`` or ``"float64"`` in place."""
        dtype = PRECISIONS[name]
        for _, p in self.named_parameters():
            p.data = np.require(p.data.astype(dtype), requirements="C")
            p.grad = None


__all__ = [
    "Module",
    "parameter",
    "normal_init",
    "kaiming_std",
    "small_init_std",
    "wang_init_std",
]
