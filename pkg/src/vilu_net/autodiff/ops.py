"""Differentiable operations on :class:`~vilu_net.autodiff.tensor.Tensor`.

Each function computes its forward value with numpy and registers a backward rule
that maps the output gradient to one gradient per input (``None`` for inputs that
do not require one). Shape errors surface as :class:`DimensionError` naming the
shapes involved.
"""

from __future__ import annotations

import builtins
from collections.abc import Sequence
from itertools import product
from typing import Any

import numpy as np
from scipy import special

from ..core.errors import DimensionError, ValidationError
from ..core.validate import ensure_positive
from .tensor import Tensor

Axis = int | tuple[int, ...] | None


def as_tensor(value: Any, like: Tensor | None = None) -> Tensor:
    """Wrap ``value`` as a constant tensor (matching ``like``'s dtype when given)."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=like.dtype if like is not None else None)


def _pair(a: Any, b: Any) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, a)
    if isinstance(b, Tensor):
        return as_tensor(a, b), b
    return as_tensor(a), as_tensor(b)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast.") from exc


def _normalize_axes(axis: Axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    out = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise DimensionError(f"axis {ax} is out of range for a {ndim}-d tensor.")
        out.append(ax % ndim)
    return tuple(sorted(out))


# --------------------------------------------------------------------------- arithmetic


def add(a: Any, b: Any) -> Tensor:
    x, y = _pair(a, b)
    _check_broadcast(x, y, "add")

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        return (
            _unbroadcast(g, x.shape) if x.requires_grad else None,
            _unbroadcast(g, y.shape) if y.requires_grad else None,
        )

    return Tensor._from_op(x.data + y.data, (x, y), backward, "add")


def sub(a: Any, b: Any) -> Tensor:
    x, y = _pair(a, b)
    _check_broadcast(x, y, "sub")

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        return (
            _unbroadcast(g, x.shape) if x.requires_grad else None,
            _unbroadcast(-g, y.shape) if y.requires_grad else None,
        )

    return Tensor._from_op(x.data - y.data, (x, y), backward, "sub")


def mul(a: Any, b: Any) -> Tensor:
    x, y = _pair(a, b)
    _check_broadcast(x, y, "mul")

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        return (
            _unbroadcast(g * y.data, x.shape) if x.requires_grad else None,
            _unbroadcast(g * x.data, y.shape) if y.requires_grad else None,
        )

    return Tensor._from_op(x.data * y.data, (x, y), backward, "mul")


def div(a: Any, b: Any) -> Tensor:
    x, y = _pair(a, b)
    _check_broadcast(x, y, "div")
    out = x.data / y.data

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        return (
            _unbroadcast(g / y.data, x.shape) if x.requires_grad else None,
            _unbroadcast(-g * out / y.data, y.shape) if y.requires_grad else None,
        )

    return Tensor._from_op(out, (x, y), backward, "div")


def neg(a: Tensor) -> Tensor:
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,), "neg")


def matmul(a: Any, b: Any) -> Tensor:
    """Matrix product over the last two axes, batched over leading axes."""
    x, y = _pair(a, b)
    if x.ndim < 2 or y.ndim < 2 or x.shape[-1] != y.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply shapes {x.shape} and {y.shape}.")
    try:
        np.broadcast_shapes(x.shape[:-2], y.shape[:-2])
    except ValueError as exc:
        raise DimensionError(
            f"matmul: batch axes of {x.shape} and {y.shape} do not broadcast."
        ) from exc

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        ga = gb = None
        if x.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(y.data, -1, -2), x.shape)
        if y.requires_grad:
            gb = _unbroadcast(np.swapaxes(x.data, -1, -2) @ g, y.shape)
        return ga, gb

    return Tensor._from_op(x.data @ y.data, (x, y), backward, "matmul")


# --------------------------------------------------------------------------- reductions


def sum(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _normalize_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        g = np.reshape(g, np.shape(out))
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape),)

    return Tensor._from_op(np.asarray(out), (a,), backward, "sum")


def mean(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes]))
    return mul(sum(a, axis=axes, keepdims=keepdims), 1.0 / count)


def cumsum(a: Tensor, axis: int) -> Tensor:
    (ax,) = _normalize_axes(axis, a.ndim)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.flip(np.cumsum(np.flip(g, ax), axis=ax), ax),)

    return Tensor._from_op(np.cumsum(a.data, axis=ax), (a,), backward, "cumsum")


# --------------------------------------------------------------------------- shape


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    target = tuple(int(s) for s in shape)
    try:
        out = a.data.reshape(target)
    except ValueError as exc:
        raise DimensionError(f"reshape: cannot reshape {a.shape} into {target}.") from exc
    return Tensor._from_op(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    order = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    if sorted(ax % a.ndim for ax in order) != list(range(a.ndim)):
        raise DimensionError(f"transpose: {order} is not a permutation for shape {a.shape}.")
    inverse = tuple(np.argsort([ax % a.ndim for ax in order]))
    return Tensor._from_op(
        np.transpose(a.data, order), (a,), lambda g: (np.transpose(g, inverse),), "transpose"
    )


def swapaxes(a: Tensor, axis1: int, axis2: int) -> Tensor:
    order = list(range(a.ndim))
    order[axis1], order[axis2] = order[axis2], order[axis1]
    return transpose(a, order)


def flip(a: Tensor, axis: Axis) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    return Tensor._from_op(np.flip(a.data, axes), (a,), lambda g: (np.flip(g, axes),), "flip")


def getitem(a: Tensor, index: Any) -> Tensor:
    """Basic (slice/integer) indexing."""
    try:
        out = a.data[index]
    except IndexError as exc:
        raise DimensionError(f"index {index!r} is invalid for shape {a.shape}.") from exc

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(a.data)
        full[index] += g
        return (full,)

    return Tensor._from_op(np.array(out, copy=True), (a,), backward, "getitem")


def pad(a: Tensor, widths: Sequence[tuple[int, int]]) -> Tensor:
    """Zero padding; ``widths`` holds one ``(before, after)`` pair per axis."""
    if len(widths) != a.ndim:
        raise DimensionError(f"pad: got {len(widths)} width pairs for shape {a.shape}.")
    crop = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, a.shape, strict=True))
    return Tensor._from_op(
        np.pad(a.data, [tuple(w) for w in widths]), (a,), lambda g: (g[crop],), "pad"
    )


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise DimensionError("stack needs at least one tensor.")
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise DimensionError(f"stack: tensors have different shapes {sorted(shapes)}.")
    out = np.stack([t.data for t in tensors], axis=axis)
    ax = axis % out.ndim

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return [np.take(g, i, axis=ax) for i in range(len(tensors))]

    return Tensor._from_op(out, tuple(tensors), backward, "stack")


# --------------------------------------------------------------------------- pointwise


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * out,), "exp")


def sigmoid(a: Tensor) -> Tensor:
    out = special.expit(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def silu(a: Tensor) -> Tensor:
    sig = special.expit(a.data)
    out = a.data * sig
    return Tensor._from_op(
        out, (a,), lambda g: (g * (sig + a.data * sig * (1.0 - sig)),), "silu"
    )


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    positive = a.data > 0
    out = np.where(positive, a.data, slope * a.data)
    return Tensor._from_op(
        out, (a,), lambda g: (np.where(positive, g, slope * g),), "leaky_relu"
    )


def abs(a: Tensor) -> Tensor:  # noqa: A001
    return Tensor._from_op(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),), "abs")


def clamp_min(a: Tensor, floor: float | np.ndarray) -> Tensor:
    """``max(a, floor)`` for a constant ``floor``; gradient passes where ``a >= floor``."""
    bound = np.asarray(floor, dtype=a.dtype)
    try:
        np.broadcast_shapes(a.shape, bound.shape)
    except ValueError as exc:
        raise DimensionError(f"clamp_min: floor {bound.shape} vs tensor {a.shape}.") from exc
    keep = a.data >= bound
    out = np.where(keep, a.data, bound)
    return Tensor._from_op(out, (a,), lambda g: (np.where(keep, g, 0.0),), "clamp_min")


def maximum(a: Any, b: Any) -> Tensor:
    """Elementwise maximum; ties route the gradient to ``a``."""
    x, y = _pair(a, b)
    _check_broadcast(x, y, "maximum")
    pick_x = x.data >= y.data

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        return (
            _unbroadcast(np.where(pick_x, g, 0.0), x.shape) if x.requires_grad else None,
            _unbroadcast(np.where(pick_x, 0.0, g), y.shape) if y.requires_grad else None,
        )

    return Tensor._from_op(np.where(pick_x, x.data, y.data), (x, y), backward, "maximum")


# --------------------------------------------------------------------------- softmax family


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    out = special.softmax(a.data, axis=axis)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(out, (a,), backward, "softmax")


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    out = special.log_softmax(a.data, axis=axis)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return Tensor._from_op(out, (a,), backward, "log_softmax")


# --------------------------------------------------------------------------- normalization


def normalize(a: Tensor, axes: Axis, eps: float) -> Tensor:
    """Zero-mean, unit-variance normalization over ``axes`` (biased variance)."""
    ensure_positive(eps, "eps")
    dims = _normalize_axes(axes, a.ndim)
    centered = a.data - a.data.mean(axis=dims, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=dims, keepdims=True) + eps)
    out = centered * inv_std

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        g_mean = g.mean(axis=dims, keepdims=True)
        proj = (g * out).mean(axis=dims, keepdims=True)
        return (inv_std * (g - g_mean - out * proj),)

    return Tensor._from_op(out, (a,), backward, "normalize")


def layer_norm(a: Tensor, axis: Axis = -1, eps: float = 1e-5) -> Tensor:
    return normalize(a, axis, eps)


def instance_norm(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-sample, per-channel normalization over the spatial axes of ``(B, C, ...)``."""
    if a.ndim < 3:
        raise DimensionError(f"instance_norm expects (B, C, *spatial); got {a.shape}.")
    return normalize(a, tuple(range(2, a.ndim)), eps)


# --------------------------------------------------------------------------- convolution


def _windows(offset: tuple[int, ...], extents: Sequence[int], stride: int) -> tuple[slice, ...]:
    return (slice(None), slice(None)) + tuple(
        slice(o, o + stride * (n - 1) + 1, stride) for o, n in zip(offset, extents, strict=True)
    )


def _check_conv_args(stride: int, padding: int) -> None:
    if isinstance(stride, bool) or not isinstance(stride, int) or stride < 1:
        raise ValidationError(f"stride must be an integer >= 1; got {stride!r}.")
    if isinstance(padding, bool) or not isinstance(padding, int) or padding < 0:
        raise ValidationError(f"padding must be a non-negative integer; got {padding!r}.")


def conv(
    x: Tensor,
    w: Tensor,
    b: Tensor | None = None,
    *,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """N-d cross-correlation: ``x`` is ``(B, C, *spatial)``, ``w`` is ``(O, C, *kernel)``."""
    _check_conv_args(stride, padding)
    rank = w.ndim - 2
    if rank < 1 or x.ndim != rank + 2 or x.shape[1] != w.shape[1]:
        raise DimensionError(f"conv: input {x.shape} is incompatible with weight {w.shape}.")
    if b is not None and b.shape != (w.shape[0],):
        raise DimensionError(f"conv: bias {b.shape} does not match weight {w.shape}.")
    kernel = w.shape[2:]
    padded = tuple(n + 2 * padding for n in x.shape[2:])
    if any(k > n for k, n in zip(kernel, padded, strict=True)):
        raise DimensionError(f"conv: kernel {kernel} is larger than padded input {padded}.")
    extents = tuple((n - k) // stride + 1 for n, k in zip(padded, kernel, strict=True))
    spatial_axes = list(range(2, rank + 2))
    xp = np.pad(x.data, [(0, 0), (0, 0)] + [(padding, padding)] * rank) if padding else x.data

    out = np.zeros((x.shape[0], *extents, w.shape[0]), dtype=np.result_type(x.data, w.data))
    for offset in product(*(range(k) for k in kernel)):
        window = xp[_windows(offset, extents, stride)]
        out += np.tensordot(window, w.data[(slice(None), slice(None), *offset)], axes=([1], [1]))
    out = np.moveaxis(out, -1, 1)
    if b is not None:
        out = out + b.data.reshape((1, -1) + (1,) * rank)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        gx = np.zeros_like(xp) if x.requires_grad else None
        gw = np.zeros_like(w.data) if w.requires_grad else None
        for offset in product(*(range(k) for k in kernel)):
            sl = _windows(offset, extents, stride)
            if gw is not None:
                gw[(slice(None), slice(None), *offset)] = np.tensordot(
                    g, xp[sl], axes=([0, *spatial_axes], [0, *spatial_axes])
                )
            if gx is not None:
                tap = w.data[(slice(None), slice(None), *offset)]
                contrib = np.tensordot(g, tap, axes=([1], [0]))
                gx[sl] += np.moveaxis(contrib, -1, 1)
        if gx is not None and padding:
            gx = gx[(slice(None), slice(None)) + (slice(padding, -padding),) * rank]
        grads: list[np.ndarray | None] = [gx, gw]
        if b is not None:
            grads.append(g.sum(axis=(0, *spatial_axes)) if b.requires_grad else None)
        return tuple(grads)

    parents = (x, w) if b is None else (x, w, b)
    return Tensor._from_op(out, parents, backward, "conv")


def conv_transpose(
    x: Tensor,
    w: Tensor,
    b: Tensor | None = None,
    *,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Adjoint of :func:`conv` with respect to its input.

    ``x`` is ``(B, C_in, *spatial)`` and ``w`` is ``(C_in, C_out, *kernel)``; output
    extents are ``(n - 1) * stride + kernel - 2 * padding``.
    """
    _check_conv_args(stride, padding)
    rank = w.ndim - 2
    if rank < 1 or x.ndim != rank + 2 or x.shape[1] != w.shape[0]:
        raise DimensionError(
            f"conv_transpose: input {x.shape} is incompatible with weight {w.shape}."
        )
    if b is not None and b.shape != (w.shape[1],):
        raise DimensionError(f"conv_transpose: bias {b.shape} does not match weight {w.shape}.")
    kernel = w.shape[2:]
    extents = x.shape[2:]
    full = tuple((n - 1) * stride + k for n, k in zip(extents, kernel, strict=True))
    if any(n - 2 * padding < 1 for n in full):
        raise DimensionError(
            f"conv_transpose: padding {padding} leaves no output for input {x.shape}."
        )
    spatial_axes = list(range(2, rank + 2))
    crop = (slice(None), slice(None)) + tuple(slice(padding, n - padding) for n in full)

    out = np.zeros((x.shape[0], w.shape[1], *full), dtype=np.result_type(x.data, w.data))
    for offset in product(*(range(k) for k in kernel)):
        contrib = np.tensordot(x.data, w.data[(slice(None), slice(None), *offset)], axes=([1], [0]))
        out[_windows(offset, extents, stride)] += np.moveaxis(contrib, -1, 1)
    out = out[crop]
    if b is not None:
        out = out + b.data.reshape((1, -1) + (1,) * rank)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        gp = np.zeros((g.shape[0], g.shape[1], *full), dtype=g.dtype)
        gp[crop] = g
        gx_shape = x.shape[:1] + extents + x.shape[1:2]
        gx = np.zeros(gx_shape, dtype=g.dtype) if x.requires_grad else None
        gw = np.zeros_like(w.data) if w.requires_grad else None
        for offset in product(*(range(k) for k in kernel)):
            window = gp[_windows(offset, extents, stride)]
            if gx is not None:
                tap = w.data[(slice(None), slice(None), *offset)]
                gx += np.tensordot(window, tap, axes=([1], [1]))
            if gw is not None:
                gw[(slice(None), slice(None), *offset)] = np.tensordot(
                    x.data, window, axes=([0, *spatial_axes], [0, *spatial_axes])
                )
        grads: list[np.ndarray | None] = [
            np.moveaxis(gx, -1, 1) if gx is not None else None,
            gw,
        ]
        if b is not None:
            grads.append(g.sum(axis=(0, *spatial_axes)) if b.requires_grad else None)
        return tuple(grads)

    parents = (x, w) if b is None else (x, w, b)
    return Tensor._from_op(out, parents, backward, "conv_transpose")


def conv2d(
    x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0
) -> Tensor:
    if w.ndim != 4:
        raise DimensionError(f"conv2d expects a 4-d weight; got {w.shape}.")
    return conv(x, w, b, stride=stride, padding=padding)


def transposed_conv2d(
    x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0
) -> Tensor:
    if w.ndim != 4:
        raise DimensionError(f"transposed_conv2d expects a 4-d weight; got {w.shape}.")
    return conv_transpose(x, w, b, stride=stride, padding=padding)


def total(values: Sequence[Tensor]) -> Tensor:
    """Sum a non-empty list of tensors."""
    return builtins.sum(values[1:], values[0])  # type: ignore[arg-type, return-value]


__all__ = [
    "as_tensor",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "sum",
    "mean",
    "cumsum",
    "reshape",
    "transpose",
    "swapaxes",
    "flip",
    "getitem",
    "pad",
    "stack",
    "exp",
    "sigmoid",
    "silu",
    "leaky_relu",
    "abs",
    "clamp_min",
    "maximum",
    "softmax",
    "log_softmax",
    "normalize",
    "layer_norm",
    "instance_norm",
    "conv",
    "conv_transpose",
    "conv2d",
    "transposed_conv2d",
    "total",
]
