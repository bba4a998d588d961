"""Residual Vision-LSTM block wrapping an mLSTM cell."""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import ops
from ..autodiff.module import Module, normal_init, parameter, small_init_std, wang_init_std
from ..autodiff.tensor import Tensor
from ..core.errors import DimensionError
from ..core.validate import ensure_positive, ensure_positive_int
from .cell import MlstmParams, mlstm_sequence


def causal_conv1d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Depthwise causal convolution along tokens.

    ``x`` is ``(B, T, C)``, ``weight`` is ``(K, C)``; output token ``t`` only sees
    tokens ``t-K+1 .. t`` (zeros before the start).
    """
    kernel = weight.shape[0]
    tokens = x.shape[1]
    padded = ops.pad(x, [(0, 0), (kernel - 1, 0), (0, 0)])
    taps = [padded[:, k : k + tokens, :] * weight[k] for k in range(kernel)]
    return ops.total(taps) + bias


class ViLBlock(Module):
    """
    Pre-norm block: ``x + W_down(norm_h(mLSTM(silu(conv(W_up_m u)))) * silu(W_up_z u))``
    with ``u = LayerNorm(x)``.

    Parameters
    ----------
    dim:
        Token width ``D``.
    num_heads:
        mLSTM heads; ``expansion * dim`` must be divisible by it.
    expansion:
        Width factor of the inner projection.
    zero_init_down:
        Start ``W_down`` at zero so the block is the identity map.
    """

    def __init__(
        self,
        dim: int,
        *,
        num_heads: int,
        rng: np.random.Generator,
        expansion: int = 2,
        conv_kernel: int = 4,
        eps: float = 1e-5,
        zero_init_down: bool = False,
        depth: int = 1,
    ) -> None:
        ensure_positive_int(dim, "dim")
        ensure_positive_int(expansion, "expansion")
        ensure_positive_int(conv_kernel, "conv_kernel")
        ensure_positive(eps, "eps")
        inner = expansion * dim
        self.dim = dim
        self.eps = eps
        self.num_heads = num_heads
        self.norm_weight = parameter(np.ones(dim))
        self.norm_bias = parameter(np.zeros(dim))
        self.w_up_mlstm = parameter(normal_init(rng, (dim, inner), small_init_std(dim)))
        self.w_up_gate = parameter(normal_init(rng, (dim, inner), small_init_std(dim)))
        self.conv_weight = parameter(
            normal_init(rng, (conv_kernel, inner), 1.0 / math.sqrt(conv_kernel))
        )
        self.conv_bias = parameter(np.zeros(inner))
        self.cell = MlstmParams(inner, num_heads, rng=rng)
        self.head_norm_weight = parameter(np.ones(inner))
        down = np.zeros((inner, dim)) if zero_init_down else normal_init(
            rng, (inner, dim), wang_init_std(dim, max(depth, 1))
        )
        self.w_down = parameter(down)

    def _head_norm(self, h: Tensor) -> Tensor:
        b, t, inner = h.shape
        heads = ops.reshape(h, (b, t, self.num_heads, inner // self.num_heads))
        normed = ops.reshape(ops.layer_norm(heads, -1, self.eps), (b, t, inner))
        return normed * self.head_norm_weight

    def forward(
        self, x: Tensor, reverse: bool = False, *, chunk_size: int | None = 64
    ) -> Tensor:
        if x.ndim != 3 or x.shape[-1] != self.dim:
            raise DimensionError(f"ViL block of width {self.dim} got tokens {x.shape}.")
        if reverse:
            x = ops.flip(x, 1)
        u = ops.layer_norm(x, -1, self.eps) * self.norm_weight + self.norm_bias
        gate = ops.silu(u @ self.w_up_gate)
        inner = ops.silu(causal_conv1d(u @ self.w_up_mlstm, self.conv_weight, self.conv_bias))
        h = self._head_norm(mlstm_sequence(self.cell, inner, chunk_size=chunk_size))
        out = x + (h * gate) @ self.w_down
        if reverse:
            out = ops.flip(out, 1)
        return out


def mlstm_block(
    block: ViLBlock, x: Tensor, reverse: bool = False, *, chunk_size: int | None = 64
) -> Tensor:
    """Apply ``block`` to tokens ``(B, T, D)``; ``reverse`` scans last-to-first."""
    return block(x, reverse, chunk_size=chunk_size)


__all__ = ["ViLBlock", "causal_conv1d", "mlstm_block"]
