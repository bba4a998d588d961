"""U-shaped segmentation network with Vision-LSTM stages."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..autodiff import ops
from ..autodiff.module import Module
from ..autodiff.tensor import Tensor, no_grad
from ..core.errors import DimensionError
from ..core.validate import ensure_divisible
from ..mlstm.block import ViLBlock
from ..utils.logging import get_logger
from .config import NetworkConfig
from .layers import ConvNormAct, SegmentationHead, UpSampler

log = get_logger("model.vilu")


def flatten_tokens(f: Tensor) -> Tensor:
    """``(B, C, *spatial) -> (B, N, C)`` with tokens in row-major (top-left first) order."""
    b, c = f.shape[:2]
    tokens = int(np.prod(f.shape[2:]))
    return ops.swapaxes(ops.reshape(f, (b, c, tokens)), 1, 2)


def unflatten_tokens(tokens: Tensor, spatial: Sequence[int]) -> Tensor:
    b, _, c = tokens.shape
    return ops.reshape(ops.swapaxes(tokens, 1, 2), (b, c, *spatial))


class ViLStage(Module):
    """Shape-preserving stack of ViL blocks with alternating scan direction."""

    def __init__(
        self,
        channels: int,
        *,
        num_blocks: int,
        num_heads: int,
        expansion: int,
        conv_kernel: int,
        eps: float,
        rng: np.random.Generator,
        zero_init_down: bool = False,
        chunk_size: int | None = 64,
    ) -> None:
        self.chunk_size = chunk_size
        self.blocks = [
            ViLBlock(
                channels,
                num_heads=num_heads,
                expansion=expansion,
                conv_kernel=conv_kernel,
                eps=eps,
                rng=rng,
                zero_init_down=zero_init_down,
                depth=num_blocks,
            )
            for _ in range(num_blocks)
        ]

    def run_tokens(self, tokens: Tensor, start_reverse: bool = False) -> Tensor:
        """Even-indexed blocks scan forward, odd ones backward; ``start_reverse`` swaps them."""
        for index, block in enumerate(self.blocks):
            reverse = (index % 2 == 1) != start_reverse
            tokens = block(tokens, reverse, chunk_size=self.chunk_size)
        return tokens

    def forward(self, f: Tensor, start_reverse: bool = False) -> Tensor:
        if not self.blocks:
            return f
        tokens = self.run_tokens(flatten_tokens(f), start_reverse)
        return unflatten_tokens(tokens, f.shape[2:])


@dataclass(frozen=True)
class FeaturePyramid:
    """Encoder outputs, finest level first; the last entry is the bottleneck."""

    levels: tuple[Tensor, ...]

    def __post_init__(self) -> None:
        for level in range(1, len(self.levels)):
            prev, cur = self.levels[level - 1].shape, self.levels[level].shape
            expected = (prev[0], prev[1] * 2, *(n // 2 for n in prev[2:]))
            if cur != expected:
                raise DimensionError(
                    f"pyramid level {level} has shape {cur}; expected {expected} from {prev}."
                )

    @property
    def skips(self) -> tuple[Tensor, ...]:
        return self.levels[:-1]

    @property
    def bottleneck(self) -> Tensor:
        return self.levels[-1]


class ViLUNet(Module):
    """
    Convolutional stem, ViL encoder with down-sampling, ViL bottleneck, decoder with
    up-sampling and additive skips, and a pointwise segmentation head.

    Parameters
    ----------
    config:
        Network hyper-parameters.
    seed:
        Seed of the parameter initialization; equal seeds give identical networks.
    """

    def __init__(self, config: NetworkConfig, *, seed: int = 0) -> None:
        self.config = config
        rng = np.random.default_rng(seed)
        rank = config.spatial_rank
        slope, eps = config.leaky_slope, config.norm_eps
        self.stem_layer = ConvNormAct(
            config.in_channels,
            config.base_channels,
            kernel=config.stem_kernel,
            padding=config.stem_kernel // 2,
            rank=rank,
            rng=rng,
            slope=slope,
            eps=eps,
        )
        self.encoder = [self._stage(level, rng) for level in range(config.num_stages - 1)]
        self.downsamplers = [
            ConvNormAct(
                config.stage_channels(level),
                config.stage_channels(level + 1),
                kernel=2,
                stride=2,
                rank=rank,
                rng=rng,
                slope=slope,
                eps=eps,
            )
            for level in range(config.num_stages - 1)
        ]
        self.bottleneck = self._stage(config.num_stages - 1, rng)
        self.upsamplers = [
            UpSampler(config.stage_channels(level + 1), rank=rank, rng=rng, slope=slope, eps=eps)
            for level in range(config.num_stages - 1)
        ]
        self.decoder = [self._stage(level, rng) for level in range(config.num_stages - 1)]
        self.head = SegmentationHead(
            config.base_channels, config.num_classes, rank=rank, rng=rng
        )
        log.debug(
            "ViLUNet stages=%d base=%d blocks/stage=%d params=%d",
            config.num_stages,
            config.base_channels,
            config.vil_blocks_per_stage,
            self.num_parameters(),
        )

    def _stage(self, level: int, rng: np.random.Generator) -> ViLStage:
        cfg = self.config
        return ViLStage(
            cfg.stage_channels(level),
            num_blocks=cfg.vil_blocks_per_stage,
            num_heads=cfg.heads_per_stage[level],
            expansion=cfg.expansion,
            conv_kernel=cfg.conv1d_kernel,
            eps=cfg.norm_eps,
            rng=rng,
            zero_init_down=cfg.zero_init_down_proj,
            chunk_size=cfg.chunk_size,
        )

    # ---------------------------------------------------------------- components

    def stem(self, x: Tensor | np.ndarray) -> Tensor:
        x = ops.as_tensor(x, self.stem_layer.weight)
        self.config.check_input_shape(x.shape)
        return self.stem_layer(x)

    def vil_stage(self, level: int, f: Tensor, *, decoder: bool = False) -> Tensor:
        if level == self.config.num_stages - 1:
            return self.bottleneck(f)
        return (self.decoder if decoder else self.encoder)[level](f)

    def downsample(self, level: int, f: Tensor) -> Tensor:
        ensure_divisible(f.shape[2:], 2, f"downsample level {level}")
        return self.downsamplers[level](f)

    def upsample_and_fuse(self, level: int, f_dec: Tensor, skip: Tensor) -> Tensor:
        return self.upsamplers[level](f_dec, skip)

    # ---------------------------------------------------------------- full passes

    def encode(self, x: Tensor | np.ndarray) -> FeaturePyramid:
        f = self.stem(x)
        levels = []
        for level in range(self.config.num_stages - 1):
            f = self.encoder[level](f)
            levels.append(f)
            f = self.downsamplers[level](f)
        levels.append(self.bottleneck(f))
        return FeaturePyramid(tuple(levels))

    def decode(self, pyramid: FeaturePyramid) -> Tensor:
        f = pyramid.bottleneck
        for level in reversed(range(self.config.num_stages - 1)):
            f = self.upsamplers[level](f, pyramid.skips[level])
            f = self.decoder[level](f)
        return self.head(f)

    def forward(self, x: Tensor | np.ndarray) -> Tensor:
        """Per-class logits ``(B, num_classes, *spatial)``."""
        return self.decode(self.encode(x))

    def predict_proba(self, x: Tensor | np.ndarray) -> np.ndarray:
        """Softmax class probabilities, computed without recording a graph."""
        with no_grad():
            return ops.softmax(self.forward(x), axis=1).numpy()

    def predict(self, x: Tensor | np.ndarray) -> np.ndarray:
        """Arg-max label map ``(B, *spatial)``."""
        return np.argmax(self.predict_proba(x), axis=1).astype(np.int64)


__all__ = ["FeaturePyramid", "ViLStage", "ViLUNet", "flatten_tokens", "unflatten_tokens"]
