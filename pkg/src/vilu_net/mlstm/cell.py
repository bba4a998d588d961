"""Matrix-memory LSTM cell with exponential gating.

Per head and token the cell keeps a value-by-key memory ``C``, a key-shaped
normalizer ``n`` and a log-domain stabilizer ``m``::

    m_t  = max(f~_t + m_{t-1}, i~_t)
    i'_t = exp(i~_t - m_t),   f'_t = exp(f~_t + m_{t-1} - m_t)
    C_t  = f'_t C_{t-1} + i'_t v_t k_t^T
    n_t  = f'_t n_{t-1} + i'_t k_t
    h~_t = C_t q_t / max(|n_t^T q_t|, exp(-m_t))
    h_t  = sigmoid(W_o x_t + b_o) * h~_t

``C`` and ``n`` are stored scaled by ``exp(-m_t)``; the ``exp(-m_t)`` floor is the
unit floor of the unscaled readout, so the stabilized and literal recurrences give
the same ``h~``. Because the readout does not depend on ``m``, the stabilizer is
computed outside the graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..autodiff import ops
from ..autodiff.module import Module, normal_init, parameter, small_init_std
from ..autodiff.tensor import Tensor, default_dtype
from ..core.errors import ConfigError, DimensionError, EmptySequenceError, NumericError
from ..core.validate import ensure_positive_int
from ..utils.logging import get_logger

log = get_logger("mlstm.cell")

STABILIZER_SENTINEL = -1e30


def _exp_floor(m: np.ndarray, dtype: np.dtype) -> np.ndarray:
    """``exp(-m)`` capped below the largest finite value of ``dtype``."""
    cap = float(np.log(np.finfo(dtype).max)) - 1.0
    return np.exp(np.minimum(-m, cap)).astype(dtype)


class MlstmParams(Module):
    """Projections and gate weights of one mLSTM cell.

    ``w_q``, ``w_k``, ``w_v`` and ``w_o`` map ``model_dim -> model_dim`` (``num_heads``
    blocks of ``head_dim``); ``w_i`` and ``w_f`` produce one scalar gate pre-activation
    per head.
    """

    def __init__(self, model_dim: int, num_heads: int, *, rng: np.random.Generator) -> None:
        ensure_positive_int(model_dim, "model_dim")
        ensure_positive_int(num_heads, "num_heads")
        if model_dim % num_heads:
            raise ConfigError(
                f"model_dim {model_dim} is not divisible by num_heads {num_heads}."
            )
        self.model_dim = model_dim
        self.num_heads = num_heads
        self.head_dim = model_dim // num_heads
        std = small_init_std(model_dim)
        self.w_q = parameter(normal_init(rng, (model_dim, model_dim), std))
        self.w_k = parameter(normal_init(rng, (model_dim, model_dim), std))
        self.w_v = parameter(normal_init(rng, (model_dim, model_dim), std))
        self.w_i = parameter(np.zeros((model_dim, num_heads)))
        self.b_i = parameter(normal_init(rng, (num_heads,), 0.1))
        self.w_f = parameter(np.zeros((model_dim, num_heads)))
        # log of sigmoid(3..6): slow decay, the usual forget-gate starting point
        self.b_f = parameter(-np.log1p(np.exp(-np.linspace(3.0, 6.0, num_heads))))
        self.w_o = parameter(normal_init(rng, (model_dim, model_dim), std))
        self.b_o = parameter(np.zeros(model_dim))


@dataclass(frozen=True)
class MlstmState:
    """Recurrent state: ``C`` is ``(B, H, d, d)``, ``n`` is ``(B, H, d)``, ``m`` is ``(B, H)``."""

    C: Tensor
    n: Tensor
    m: np.ndarray

    @classmethod
    def initial(cls, batch: int, num_heads: int, head_dim: int) -> MlstmState:
        dtype = default_dtype()
        return cls(
            C=Tensor(np.zeros((batch, num_heads, head_dim, head_dim)), dtype=dtype),
            n=Tensor(np.zeros((batch, num_heads, head_dim)), dtype=dtype),
            m=np.full((batch, num_heads), STABILIZER_SENTINEL, dtype=dtype),
        )


@dataclass(frozen=True)
class _Projected:
    q: Tensor  # (B, H, T, d)
    k: Tensor
    v: Tensor
    igate: Tensor  # (B, H, T)
    fgate: Tensor
    ogate: Tensor  # (B, T, D)


def split_heads(x: Tensor, num_heads: int) -> Tensor:
    """``(B, T, H*d) -> (B, H, T, d)``."""
    b, t, dim = x.shape
    return ops.transpose(ops.reshape(x, (b, t, num_heads, dim // num_heads)), (0, 2, 1, 3))


def merge_heads(x: Tensor) -> Tensor:
    """``(B, H, T, d) -> (B, T, H*d)``."""
    b, h, t, d = x.shape
    return ops.reshape(ops.transpose(x, (0, 2, 1, 3)), (b, t, h * d))


def project(params: MlstmParams, x: Tensor) -> _Projected:
    """Queries, scaled keys, values and gate pre-activations for ``x`` of shape ``(B, T, D)``."""
    if x.ndim != 3 or x.shape[-1] != params.model_dim:
        raise DimensionError(
            f"mLSTM input {x.shape} does not end in model_dim {params.model_dim}."
        )
    heads = params.num_heads
    return _Projected(
        q=split_heads(x @ params.w_q, heads),
        k=split_heads(x @ params.w_k, heads) * (1.0 / math.sqrt(params.head_dim)),
        v=split_heads(x @ params.w_v, heads),
        igate=ops.transpose(x @ params.w_i + params.b_i, (0, 2, 1)),
        fgate=ops.transpose(x @ params.w_f + params.b_f, (0, 2, 1)),
        ogate=ops.sigmoid(x @ params.w_o + params.b_o),
    )


def cell_step(
    state: MlstmState,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    igate: Tensor,
    fgate: Tensor,
) -> tuple[Tensor, MlstmState]:
    """One stabilized update from per-head ``q, k, v`` ``(B, H, d)`` and gates ``(B, H)``."""
    b, h, d = q.shape
    m_new = np.maximum(fgate.data + state.m, igate.data)
    i_gate = ops.reshape(ops.exp(igate - m_new), (b, h, 1))
    f_gate = ops.reshape(ops.exp(fgate + (state.m - m_new)), (b, h, 1))
    outer = ops.reshape(v, (b, h, d, 1)) * ops.reshape(k, (b, h, 1, d))
    cell = ops.reshape(f_gate, (b, h, 1, 1)) * state.C + ops.reshape(i_gate, (b, h, 1, 1)) * outer
    normalizer = f_gate * state.n + i_gate * k
    numerator = ops.sum(cell * ops.reshape(q, (b, h, 1, d)), axis=-1)
    denominator = ops.sum(normalizer * q, axis=-1)
    floor = _exp_floor(m_new, q.dtype)
    h_tilde = numerator / ops.reshape(ops.clamp_min(ops.abs(denominator), floor), (b, h, 1))
    return h_tilde, MlstmState(C=cell, n=normalizer, m=m_new)


def mlstm_step(
    params: MlstmParams, state: MlstmState, x_t: Tensor
) -> tuple[Tensor, MlstmState]:
    """Advance the cell by one token ``x_t`` of shape ``(B, model_dim)``; returns ``h_t``."""
    if x_t.ndim != 2:
        raise DimensionError(f"mlstm_step expects (B, model_dim); got {x_t.shape}.")
    b = x_t.shape[0]
    proj = project(params, ops.reshape(x_t, (b, 1, params.model_dim)))
    h_tilde, new_state = cell_step(
        state,
        proj.q[:, :, 0],
        proj.k[:, :, 0],
        proj.v[:, :, 0],
        proj.igate[:, :, 0],
        proj.fgate[:, :, 0],
    )
    h = ops.reshape(h_tilde, (b, params.model_dim)) * ops.reshape(proj.ogate, (b, params.model_dim))
    return h, new_state


def mlstm_recurrent(q: Tensor, k: Tensor, v: Tensor, igate: Tensor, fgate: Tensor) -> Tensor:
    """Sequential fold of :func:`cell_step` over the token axis of ``(B, H, T, d)`` inputs."""
    b, h, t, d = q.shape
    state = MlstmState.initial(b, h, d)
    outputs = []
    for step in range(t):
        try:
            out, state = cell_step(
                state,
                q[:, :, step],
                k[:, :, step],
                v[:, :, step],
                igate[:, :, step],
                fgate[:, :, step],
            )
        except NumericError as exc:
            raise NumericError(f"mLSTM non-finite state at token {step}: {exc}") from exc
        outputs.append(out)
    return ops.stack(outputs, axis=2)


def mlstm_chunkwise(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    igate: Tensor,
    fgate: Tensor,
    chunk_size: int,
) -> Tensor:
    """Chunked parallel evaluation, equal to :func:`mlstm_recurrent` up to rounding.

    Inside a chunk of length ``L`` every output is a masked, gate-weighted
    attention-like sum over earlier tokens of the same chunk. Across chunks, each
    chunk's memory increment is summed into the carried state with a second masked
    weighting over chunk indices, so there is no Python loop over tokens or chunks.
    Padding tokens are appended after the sequence and never influence real outputs.
    """
    ensure_positive_int(chunk_size, "chunk_size")
    b, h, t, d = q.shape
    dv = v.shape[-1]
    size = min(chunk_size, t)
    chunks = -(-t // size)
    extra = chunks * size - t
    if extra:
        seq_pad = [(0, 0), (0, 0), (0, extra), (0, 0)]
        q, k, v = ops.pad(q, seq_pad), ops.pad(k, seq_pad), ops.pad(v, seq_pad)
        igate = ops.pad(igate, seq_pad[:3])
        fgate = ops.pad(fgate, seq_pad[:3])
    dtype = q.dtype
    q4 = ops.reshape(q, (b, h, chunks, size, d))
    k4 = ops.reshape(k, (b, h, chunks, size, d))
    v4 = ops.reshape(v, (b, h, chunks, size, dv))
    i4 = ops.reshape(igate, (b, h, chunks, size))
    f4 = ops.reshape(fgate, (b, h, chunks, size))

    # Stabilizers, computed outside the graph.
    causal = np.tril(np.ones((size, size), dtype=bool))
    earlier = np.tril(np.ones((chunks, chunks), dtype=bool), k=-1)
    has_prev = (np.arange(chunks) > 0)[:, None]
    cum_f = np.cumsum(f4.data, axis=-1)
    log_w_np = cum_f[..., :, None] - cum_f[..., None, :] + i4.data[..., None, :]
    chunk_f = cum_f[..., -1]
    local_max = (chunk_f[..., None] - cum_f + i4.data).max(axis=-1)
    total_f = np.cumsum(chunk_f, axis=-1)
    carry_np = (total_f - chunk_f)[..., :, None] - total_f[..., None, :] + local_max[..., None, :]
    carry_max = np.where(earlier, carry_np, -np.inf).max(axis=-1)
    carry_max = np.where(has_prev[:, 0], carry_max, 0.0)
    entry = np.where(has_prev, cum_f + carry_max[..., None], STABILIZER_SENTINEL)
    m = np.maximum(entry, np.where(causal, log_w_np, -np.inf).max(axis=-1))

    cum = ops.cumsum(f4, axis=-1)
    log_w = ops.reshape(cum, (b, h, chunks, size, 1)) - ops.reshape(cum, (b, h, chunks, 1, size))
    log_w = log_w + ops.reshape(i4, (b, h, chunks, 1, size))
    intra_offset = np.where(causal, -m[..., None], STABILIZER_SENTINEL)
    weights = ops.exp(log_w * causal.astype(dtype) + intra_offset)
    scores = (q4 @ ops.swapaxes(k4, -1, -2)) * weights
    numerator = scores @ v4
    denominator = ops.sum(scores, axis=-1)

    if chunks > 1:
        last = cum[:, :, :, size - 1]
        increment_w = ops.exp(
            ops.reshape(last, (b, h, chunks, 1)) - cum + i4 - local_max[..., None]
        )
        weighted_k = k4 * ops.reshape(increment_w, (b, h, chunks, size, 1))
        c_increment = ops.swapaxes(v4, -1, -2) @ weighted_k
        n_increment = ops.sum(weighted_k, axis=-2)
        total = ops.cumsum(last, axis=-1)
        carry_log = ops.reshape(total - last, (b, h, chunks, 1)) - ops.reshape(
            total, (b, h, 1, chunks)
        )
        carry_log = carry_log + local_max[..., None, :]
        carry_offset = np.where(earlier, -carry_max[..., None], STABILIZER_SENTINEL)
        carry = ops.exp(carry_log * earlier.astype(dtype) + carry_offset)
        c_prev = ops.reshape(
            carry @ ops.reshape(c_increment, (b, h, chunks, dv * d)), (b, h, chunks, dv, d)
        )
        n_prev = carry @ n_increment
        decay = ops.exp(
            cum + np.where(has_prev, carry_max[..., None] - m, STABILIZER_SENTINEL)
        )
        decay5 = ops.reshape(decay, (b, h, chunks, size, 1))
        numerator = numerator + (q4 @ ops.swapaxes(c_prev, -1, -2)) * decay5
        denominator = denominator + ops.sum(
            q4 * ops.reshape(n_prev, (b, h, chunks, 1, d)), axis=-1
        ) * decay

    floor = _exp_floor(m, dtype)
    guard = ops.reshape(ops.clamp_min(ops.abs(denominator), floor), (b, h, chunks, size, 1))
    out = ops.reshape(numerator / guard, (b, h, chunks * size, dv))
    log.debug("mLSTM chunkwise T=%d chunks=%d size=%d", t, chunks, size)
    if extra:
        out = out[:, :, :t]
    return out


def mlstm_sequence(
    params: MlstmParams,
    x: Tensor | np.ndarray,
    reverse: bool = False,
    *,
    chunk_size: int | None = None,
) -> Tensor:
    """
    Run the cell over a token sequence.

    Parameters
    ----------
    x:
        ``(T, model_dim)`` or ``(B, T, model_dim)``.
    reverse:
        Process the tokens last-to-first; the output is returned in input order.
    chunk_size:
        ``None`` folds :func:`mlstm_step` token by token; an integer selects the
        chunked parallel form.
    """
    shape = np.shape(x.data if isinstance(x, Tensor) else x)
    if len(shape) not in (2, 3):
        raise DimensionError(f"mLSTM input must be (T, D) or (B, T, D); got {shape}.")
    if shape[-2] == 0:
        raise EmptySequenceError("mLSTM needs a sequence with at least one token.")
    x = ops.as_tensor(x)
    unbatched = x.ndim == 2
    if unbatched:
        x = ops.reshape(x, (1, *x.shape))
    if reverse:
        x = ops.flip(x, 1)
    b, t, dim = x.shape
    if chunk_size is None:
        state = MlstmState.initial(b, params.num_heads, params.head_dim)
        outputs = []
        for step in range(t):
            try:
                h_t, state = mlstm_step(params, state, x[:, step])
            except NumericError as exc:
                raise NumericError(f"mLSTM non-finite state at token {step}: {exc}") from exc
            outputs.append(h_t)
        out = ops.stack(outputs, axis=1)
    else:
        proj = project(params, x)
        try:
            h_tilde = mlstm_chunkwise(
                proj.q, proj.k, proj.v, proj.igate, proj.fgate, chunk_size
            )
        except NumericError as exc:
            raise NumericError(f"mLSTM non-finite values in chunked pass: {exc}") from exc
        out = merge_heads(h_tilde) * proj.ogate
    if reverse:
        out = ops.flip(out, 1)
    if unbatched:
        out = ops.reshape(out, (t, dim))
    return out


__all__ = [
    "STABILIZER_SENTINEL",
    "MlstmParams",
    "MlstmState",
    "split_heads",
    "merge_heads",
    "project",
    "cell_step",
    "mlstm_step",
    "mlstm_recurrent",
    "mlstm_chunkwise",
    "mlstm_sequence",
]
