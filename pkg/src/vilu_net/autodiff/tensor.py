"""Dense tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a contiguous numpy array. Operations in
:mod:`vilu_net.autodiff.ops` create new tensors that remember their inputs and a
backward rule; :func:`backward` replays those records in reverse topological order.
"""

from __future__ import annotations

import contextlib
import contextvars
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.typing import ArrayLike

from ..core.errors import ContractError, DimensionError, NumericError, ValidationError

if TYPE_CHECKING:
    from collections.abc import Iterable

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]

PRECISIONS: dict[str, type[np.floating[Any]]] = {
    "float32": np.float32,
    "float64": np.float64,
}

_precision: contextvars.ContextVar[str] = contextvars.ContextVar(
    "vilu_precision", default="float32"
)
_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "vilu_grad_enabled", default=True
)


def _check_precision(name: str) -> None:
    if name not in PRECISIONS:
        raise ValidationError(f"precision must be one of {sorted(PRECISIONS)}; got {name!r}.")


def default_dtype() -> np.dtype[Any]:
    """Floating dtype used for new tensors in the current context."""
    return np.dtype(PRECISIONS[_precision.get()])


def set_precision(name: str) -> None:
    """Set the precision of the current context (``"float32"`` or ``"float64"``)."""
    _check_precision(name)
    _precision.set(name)


@contextlib.contextmanager
def precision(name: str) -> Iterator[None]:
    """Temporarily switch the precision used for new tensors."""
    _check_precision(name)
    token = _precision.set(name)
    try:
        yield
    finally:
        _precision.reset(token)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording, e.g. for inference on a frozen network."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


def _check_extents(shape: tuple[int, ...], what: str) -> None:
    if any(extent <= 0 for extent in shape):
        raise DimensionError(f"{what} has a non-positive extent in shape {shape}.")


class Tensor:
    """N-dimensional floating-point array with optional gradient tracking.

    Tensors are treated as immutable once created; only ``grad`` changes, and
    optimizers update parameter ``data`` in place between steps.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "op", "_parents", "_backward")
    __array_priority__ = 1000

    def __init__(
        self,
        data: ArrayLike,
        *,
        requires_grad: bool = False,
        dtype: Any = None,
        name: str | None = None,
    ) -> None:
        if isinstance(data, Tensor):
            data = data.data
        array = np.array(data, dtype=dtype if dtype is not None else default_dtype())
        if not np.issubdtype(array.dtype, np.floating):
            raise ValidationError(f"Tensor data must be floating point; got {array.dtype}.")
        _check_extents(array.shape, "Tensor")
        if not np.all(np.isfinite(array)):
            raise NumericError(f"Tensor {name or '<unnamed>'} created from non-finite values.")
        self.data: np.ndarray = np.require(array, requirements="C")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    @classmethod
    def _from_op(
        cls,
        data: np.ndarray,
        parents: tuple[Tensor, ...],
        backward: BackwardFn,
        op: str,
    ) -> Tensor:
        if not np.all(np.isfinite(data)):
            raise NumericError(f"{op} produced non-finite values (output shape {data.shape}).")
        out = cls.__new__(cls)
        out.data = np.require(data, requirements="C")
        out.grad = None
        out.name = None
        out.op = op
        track = _grad_enabled.get() and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = parents if track else ()
        out._backward = backward if track else None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype[Any]:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag}, op={self.op})"

    def __len__(self) -> int:
        return self.shape[0]

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        """The single value of a one-element tensor."""
        if self.size != 1:
            raise ValidationError(f"item() needs a one-element tensor; got shape {self.shape}.")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        return Tensor(self.data, dtype=self.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> ComputationTape:
        return backward(self)

    # Operator sugar; the rules live in ``ops``.
    def __add__(self, other: Any) -> Tensor:
        from . import ops

        return ops.add(self, other)

    def __radd__(self, other: Any) -> Tensor:
        from . import ops

        return ops.add(other, self)

    def __sub__(self, other: Any) -> Tensor:
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> Tensor:
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other: Any) -> Tensor:
        from . import ops

        return ops.mul(self, other)

    def __rmul__(self, other: Any) -> Tensor:
        from . import ops

        return ops.mul(other, self)

    def __truediv__(self, other: Any) -> Tensor:
        from . import ops

        return ops.div(self, other)

    def __rtruediv__(self, other: Any) -> Tensor:
        from . import ops

        return ops.div(other, self)

    def __neg__(self) -> Tensor:
        from . import ops

        return ops.neg(self)

    def __matmul__(self, other: Any) -> Tensor:
        from . import ops

        return ops.matmul(self, other)

    def __getitem__(self, index: Any) -> Tensor:
        from . import ops

        return ops.getitem(self, index)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        from . import ops

        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        from . import ops

        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> Tensor:
        from . import ops

        if len(shape) == 1 and isinstance(shape[0], tuple | list):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes: int) -> Tensor:
        from . import ops

        return ops.transpose(self, axes or None)


@dataclass(frozen=True)
class ComputationTape:
    """Recorded operations reachable from a root, in topological order.

    Every node appears after all of its inputs; leaves come first.
    """

    nodes: tuple[Tensor, ...]

    @classmethod
    def record(cls, root: Tensor) -> ComputationTape:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return cls(tuple(order))

    def __len__(self) -> int:
        return len(self.nodes)

    def leaves(self) -> Iterable[Tensor]:
        return (node for node in self.nodes if node.is_leaf)


def backward(loss: Tensor) -> ComputationTape:
    """Accumulate ``d loss / d leaf`` into ``leaf.grad`` for every reachable leaf.

    Repeated calls add to existing gradients; clear them with ``zero_grad``.
    """
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss; got shape {loss.shape}.")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any tensor that requires gradients.")
    tape = ComputationTape.record(loss)
    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        grad = pending.pop(id(node), None)
        if grad is None:
            continue
        if node._backward is None:
            if node.grad is None:
                node.grad = np.array(grad, dtype=node.dtype)
            else:
                node.grad = node.grad + grad
            continue
        parent_grads = node._backward(grad)
        for parent, parent_grad in zip(node._parents, parent_grads, strict=True):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = parent_grad if key not in pending else pending[key] + parent_grad
    return tape


def zero_grads(tensors: Iterable[Tensor]) -> None:
    """Clear accumulated gradients."""
    for tensor in tensors:
        tensor.grad = None


__all__ = [
    "PRECISIONS",
    "Tensor",
    "ComputationTape",
    "backward",
    "zero_grads",
    "default_dtype",
    "set_precision",
    "precision",
    "no_grad",
    "is_grad_enabled",
]
