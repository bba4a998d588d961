"""Convolutional building blocks shared by the stem, samplers and head."""

from __future__ import annotations

import numpy as np

from ..autodiff import ops
from ..autodiff.module import Module, kaiming_std, normal_init, parameter
from ..autodiff.tensor import Tensor
from ..core.validate import ensure_same_shape


def _channel_view(values: Tensor, rank: int) -> Tensor:
    """``(C,) -> (1, C, 1, ...)`` for broadcasting over ``(B, C, *spatial)``."""
    return ops.reshape(values, (1, values.shape[0]) + (1,) * rank)


class ConvNormAct(Module):
    """Convolution (or transposed convolution), affine instance norm, leaky ReLU.

    The affine norm starts at ``gamma = 1`` and ``beta = 0``.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        *,
        kernel: int,
        rank: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
        transpose: bool = False,
        slope: float = 0.01,
        eps: float = 1e-5,
    ) -> None:
        self.rank = rank
        self.stride = stride
        self.padding = padding
        self.transpose = transpose
        self.slope = slope
        self.eps = eps
        shape = (in_channels, out_channels) if transpose else (out_channels, in_channels)
        fan_in = in_channels * kernel**rank
        self.weight = parameter(
            normal_init(rng, shape + (kernel,) * rank, kaiming_std(fan_in, slope))
        )
        self.bias = parameter(np.zeros(out_channels))
        self.norm_weight = parameter(np.ones(out_channels))
        self.norm_bias = parameter(np.zeros(out_channels))

    def forward(self, x: Tensor) -> Tensor:
        layer = ops.conv_transpose if self.transpose else ops.conv
        y = layer(x, self.weight, self.bias, stride=self.stride, padding=self.padding)
        y = ops.instance_norm(y, self.eps)
        gamma = _channel_view(self.norm_weight, self.rank)
        y = y * gamma + _channel_view(self.norm_bias, self.rank)
        return ops.leaky_relu(y, self.slope)


class UpSampler(Module):
    """Channel-halving transposed convolution followed by additive skip fusion."""

    def __init__(
        self,
        in_channels: int,
        *,
        rank: int,
        rng: np.random.Generator,
        slope: float = 0.01,
        eps: float = 1e-5,
    ) -> None:
        self.layer = ConvNormAct(
            in_channels,
            in_channels // 2,
            kernel=2,
            stride=2,
            rank=rank,
            rng=rng,
            transpose=True,
            slope=slope,
            eps=eps,
        )

    def forward(self, f_dec: Tensor, skip: Tensor) -> Tensor:
        up = self.layer(f_dec)
        ensure_same_shape(up.shape, skip.shape, "upsampled decoder features vs skip")
        return up + skip


class SegmentationHead(Module):
    """Pointwise convolution to per-class logits."""

    def __init__(
        self, in_channels: int, num_classes: int, *, rank: int, rng: np.random.Generator
    ) -> None:
        self.weight = parameter(
            normal_init(rng, (num_classes, in_channels) + (1,) * rank, 1.0 / np.sqrt(in_channels))
        )
        self.bias = parameter(np.zeros(num_classes))

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv(x, self.weight, self.bias)


__all__ = ["ConvNormAct", "UpSampler", "SegmentationHead"]
