"""Network hyper-parameters."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field, fields
from typing import Any

from ..core.errors import ConfigError
from ..core.validate import (
    ensure_divisible,
    ensure_non_negative,
    ensure_positive,
    ensure_positive_int,
)


@dataclass(frozen=True)
class NetworkConfig:
    """
    Shape and width of a ViLU-Net.

    Channels double at every stage: stage ``l`` has ``base_channels * 2**l`` channels,
    and its ViL blocks run ``num_heads[l]`` mLSTM heads of width
    ``expansion * channels / num_heads[l]``.

    Parameters
    ----------
    num_heads:
        One head count for every stage, or a sequence with one entry per stage.
    vil_blocks_per_stage:
        Even number of ViL blocks per encoder, bottleneck and decoder stage; blocks
        alternate forward and backward scans. ``0`` gives the convolutional skeleton.
    spatial_rank:
        2 for images, 3 for volumes.
    chunk_size:
        Chunk length of the parallel mLSTM form; ``None`` runs the sequential fold.
    """

    in_channels: int = 1
    num_classes: int = 2
    base_channels: int = 16
    num_stages: int = 4
    vil_blocks_per_stage: int = 2
    num_heads: int | tuple[int, ...] = 4
    expansion: int = 2
    conv1d_kernel: int = 4
    stem_kernel: int = 3
    leaky_slope: float = 0.01
    norm_eps: float = 1e-5
    spatial_rank: int = 2
    chunk_size: int | None = 64
    zero_init_down_proj: bool = False
    heads_per_stage: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        ensure_positive_int(self.in_channels, "in_channels")
        ensure_positive_int(self.base_channels, "base_channels")
        ensure_positive_int(self.expansion, "expansion")
        ensure_positive_int(self.conv1d_kernel, "conv1d_kernel")
        ensure_positive_int(self.stem_kernel, "stem_kernel")
        ensure_positive(self.norm_eps, "norm_eps")
        ensure_non_negative(self.leaky_slope, "leaky_slope")
        if not isinstance(self.num_classes, int) or self.num_classes < 2:
            raise ConfigError(f"num_classes must be an integer >= 2; got {self.num_classes!r}.")
        if not isinstance(self.num_stages, int) or self.num_stages < 2:
            raise ConfigError(f"num_stages must be an integer >= 2; got {self.num_stages!r}.")
        blocks = self.vil_blocks_per_stage
        if not isinstance(blocks, int) or isinstance(blocks, bool) or blocks < 0 or blocks % 2:
            raise ConfigError(
                f"vil_blocks_per_stage must be a non-negative even integer; got {blocks!r}."
            )
        if self.spatial_rank not in (2, 3):
            raise ConfigError(f"spatial_rank must be 2 or 3; got {self.spatial_rank!r}.")
        if self.stem_kernel % 2 == 0:
            raise ConfigError(
                f"stem_kernel must be odd to preserve extents; got {self.stem_kernel}."
            )
        if self.chunk_size is not None:
            ensure_positive_int(self.chunk_size, "chunk_size")

        heads = self.num_heads
        if isinstance(heads, Sequence):
            heads = tuple(int(h) for h in heads)
            if len(heads) != self.num_stages:
                raise ConfigError(
                    f"num_heads has {len(heads)} entries for {self.num_stages} stages."
                )
            object.__setattr__(self, "num_heads", heads)
        else:
            heads = (heads,) * self.num_stages
        for stage, count in enumerate(heads):
            ensure_positive_int(count, f"num_heads[{stage}]")
            inner = self.expansion * self.stage_channels(stage)
            if inner % count:
                raise ConfigError(
                    f"stage {stage}: inner width {inner} is not divisible by {count} heads."
                )
        object.__setattr__(self, "heads_per_stage", heads)

    # ---------------------------------------------------------------- derived shapes

    def stage_channels(self, stage: int) -> int:
        return self.base_channels * 2**stage

    def head_dim(self, stage: int) -> int:
        return self.expansion * self.stage_channels(stage) // self.heads_per_stage[stage]

    @property
    def divisor(self) -> int:
        """Spatial extents must be multiples of ``2 ** (num_stages - 1)``."""
        return 2 ** (self.num_stages - 1)

    def check_input_shape(self, shape: Sequence[int]) -> None:
        """Validate ``(B, in_channels, *spatial)``, naming any indivisible extent."""
        if len(shape) != self.spatial_rank + 2:
            raise ConfigError(
                f"expected a rank-{self.spatial_rank} batch (B, C, *spatial); got {tuple(shape)}."
            )
        if shape[1] != self.in_channels:
            raise ConfigError(f"expected {self.in_channels} input channels; got {shape[1]}.")
        ensure_divisible(tuple(shape[2:]), self.divisor, "input")

    # ---------------------------------------------------------------- parameter count

    def _block_parameters(self, stage: int) -> int:
        dim = self.stage_channels(stage)
        inner = self.expansion * dim
        heads = self.heads_per_stage[stage]
        norm = 2 * dim
        up = 2 * dim * inner
        conv = self.conv1d_kernel * inner + inner
        cell = 4 * inner * inner + inner + 2 * (inner * heads + heads)
        return norm + up + conv + cell + inner + inner * dim

    def _conv_norm_parameters(self, c_in: int, c_out: int, kernel: int) -> int:
        return c_in * c_out * kernel**self.spatial_rank + 3 * c_out

    def parameter_count(self) -> int:
        """Closed-form number of trainable scalars."""
        stages = self.num_stages
        total = self._conv_norm_parameters(self.in_channels, self.base_channels, self.stem_kernel)
        for stage in range(stages - 1):
            c, c_next = self.stage_channels(stage), self.stage_channels(stage + 1)
            total += 2 * self.vil_blocks_per_stage * self._block_parameters(stage)
            total += self._conv_norm_parameters(c, c_next, 2)
            total += self._conv_norm_parameters(c_next, c, 2)
        total += self.vil_blocks_per_stage * self._block_parameters(stages - 1)
        total += self.base_channels * self.num_classes + self.num_classes
        return total

    # ---------------------------------------------------------------- serialization

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data.pop("heads_per_stage")
        if isinstance(data["num_heads"], tuple):
            data["num_heads"] = list(data["num_heads"])
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> NetworkConfig:
        known = {f.name for f in fields(cls) if f.init}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown network config keys: {unknown}.")
        values = dict(data)
        if isinstance(values.get("num_heads"), list):
            values["num_heads"] = tuple(values["num_heads"])
        return cls(**values)


__all__ = ["NetworkConfig"]
