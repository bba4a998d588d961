"""Minimal dense tensor library with reverse-mode automatic differentiation."""

from . import ops
from .module import Module, parameter
from .gradcheck import GradcheckReport, check_gradients, relative_error
from .tensor import (
    PRECISIONS,
    ComputationTape,
    Tensor,
    backward,
    default_dtype,
    is_grad_enabled,
    no_grad,
    precision,
    set_precision,
    zero_grads,
)

__all__ = [
    "ops",
    "Module",
    "parameter",
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
    "GradcheckReport",
    "check_gradients",
    "relative_error",
]
