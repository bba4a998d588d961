"""Tests for the tensor library and its reverse-mode gradients."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from vilu_net.autodiff import (
    ComputationTape,
    Tensor,
    backward,
    check_gradients,
    no_grad,
    ops,
    parameter,
    precision,
    relative_error,
)
from vilu_net.core.errors import ContractError, DimensionError, NumericError, ValidationError


def _const(values: object) -> Tensor:
    return Tensor(np.asarray(values, dtype=float))


def test_matmul_identity_returns_matrix(float64: None) -> None:
    """Multiplying by the identity leaves the matrix unchanged."""
    m = np.arange(12.0).reshape(3, 4)
    out = ops.matmul(_const(np.eye(3)), _const(m))
    np.testing.assert_array_equal(out.data, m)


def test_matmul_hand_expanded_product() -> None:
    """[[1,2],[3,4]] times a column of ones gives the row sums."""
    out = _const([[1, 2], [3, 4]]) @ _const([[1], [1]])
    np.testing.assert_array_equal(out.data, [[3.0], [7.0]])


def test_matmul_shape_mismatch_names_both_shapes() -> None:
    """Mismatched inner extents raise a dimension error naming the shapes."""
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        ops.matmul(_const(np.ones((2, 3))), _const(np.ones((2, 3))))


def test_matmul_gradient_matches_finite_differences(
    float64: None, rng: np.random.Generator
) -> None:
    """The gradient of sum(A @ B) agrees with central differences to 1e-6."""
    a = parameter(rng.normal(size=(3, 4)), name="a")
    b = parameter(rng.normal(size=(4, 2)), name="b")
    report = check_gradients(
        lambda: ops.sum(a @ b), [("a", a), ("b", b)], samples=20, tolerance=1e-6
    )
    assert report.passed, report
    backward(ops.sum(a @ b))
    np.testing.assert_allclose(a.grad, np.ones((3, 2)) @ b.data.T)
    np.testing.assert_allclose(b.grad, a.data.T @ np.ones((3, 2)))


def test_conv2d_unit_kernel_is_identity(float64: None, rng: np.random.Generator) -> None:
    """A 1x1 kernel of weight one and zero bias reproduces its input."""
    x = rng.normal(size=(2, 1, 5, 7))
    out = ops.conv2d(_const(x), _const(np.ones((1, 1, 1, 1))), _const([0.0]))
    np.testing.assert_array_equal(out.data, x)


def test_conv2d_all_ones_sums_window() -> None:
    """A 3x3 ones kernel over a 5x5 ones image gives nine everywhere."""
    out = ops.conv2d(_const(np.ones((1, 1, 5, 5))), _const(np.ones((1, 1, 3, 3))))
    assert out.shape == (1, 1, 3, 3)
    np.testing.assert_array_equal(out.data, np.full((1, 1, 3, 3), 9.0))


@pytest.mark.parametrize(
    ("extent", "kernel", "stride", "padding", "expected"),
    [(32, 2, 2, 0, 16), (32, 3, 1, 1, 32), (7, 3, 2, 1, 4), (5, 5, 1, 0, 1)],
)
def test_conv2d_output_extent_formula(
    extent: int, kernel: int, stride: int, padding: int, expected: int
) -> None:
    """Output extents follow floor((n + 2p - k) / s) + 1."""
    x = _const(np.zeros((1, 2, extent, extent)))
    w = _const(np.zeros((3, 2, kernel, kernel)))
    out = ops.conv2d(x, w, stride=stride, padding=padding)
    assert out.shape == (1, 3, expected, expected)


def test_conv2d_rejects_kernel_larger_than_input() -> None:
    """A kernel that does not fit the padded input is a dimension error."""
    with pytest.raises(DimensionError, match="larger than padded input"):
        ops.conv2d(_const(np.zeros((1, 1, 2, 2))), _const(np.zeros((1, 1, 3, 3))))


@pytest.mark.parametrize(("stride", "padding"), [(0, 0), (1, -1)])
def test_conv2d_rejects_bad_stride_or_padding(stride: int, padding: int) -> None:
    """Stride must be at least one and padding non-negative."""
    with pytest.raises(ValidationError):
        ops.conv2d(
            _const(np.zeros((1, 1, 4, 4))),
            _const(np.zeros((1, 1, 2, 2))),
            stride=stride,
            padding=padding,
        )


def test_transposed_conv2d_doubles_extent() -> None:
    """Kernel two, stride two maps 16x16 to 32x32."""
    x = _const(np.ones((1, 4, 16, 16)))
    out = ops.transposed_conv2d(x, _const(np.ones((4, 2, 2, 2))), stride=2)
    assert out.shape == (1, 2, 32, 32)


@pytest.mark.parametrize(("kernel", "stride", "padding"), [(2, 2, 0), (3, 1, 1), (3, 2, 0)])
def test_transposed_conv_is_adjoint_of_conv(
    float64: None, rng: np.random.Generator, kernel: int, stride: int, padding: int
) -> None:
    """conv_transpose(y, w) equals the input gradient of <conv(x, w), y>."""
    x = parameter(rng.normal(size=(2, 3, 8, 8)))
    w = _const(rng.normal(size=(4, 3, kernel, kernel)))
    forward = ops.conv(x, w, stride=stride, padding=padding)
    y = rng.normal(size=forward.shape)
    backward(ops.sum(forward * y))
    adjoint = ops.conv_transpose(_const(y), w, stride=stride, padding=padding)
    # stride 2, kernel 3 leaves the last input row outside every window
    assert adjoint.shape[:2] == x.shape[:2]
    grad = x.grad
    assert grad is not None
    crop = (slice(None), slice(None), slice(0, adjoint.shape[2]), slice(0, adjoint.shape[3]))
    np.testing.assert_allclose(adjoint.data, grad[crop], atol=1e-12)


def test_transposed_conv_zero_input_gives_bias() -> None:
    """A zero input produces the bias broadcast over every voxel."""
    out = ops.transposed_conv2d(
        _const(np.zeros((1, 2, 3, 3))),
        _const(np.ones((2, 3, 2, 2))),
        _const([1.0, -2.0, 0.5]),
        stride=2,
    )
    for channel, value in enumerate([1.0, -2.0, 0.5]):
        np.testing.assert_array_equal(out.data[0, channel], np.full((6, 6), value))


def test_conv_supports_three_spatial_axes(float64: None, rng: np.random.Generator) -> None:
    """The same convolution code runs on volumes."""
    x = _const(rng.normal(size=(1, 2, 4, 6, 6)))
    down = ops.conv(x, _const(rng.normal(size=(4, 2, 2, 2, 2))), stride=2)
    up = ops.conv_transpose(down, _const(rng.normal(size=(4, 2, 2, 2, 2))), stride=2)
    assert down.shape == (1, 4, 2, 3, 3)
    assert up.shape == x.shape


def test_softmax_of_equal_logits_is_uniform() -> None:
    """Equal logits over k classes give 1/k each."""
    out = ops.softmax(_const(np.full((2, 5, 3), 0.7)), axis=1)
    np.testing.assert_allclose(out.data, 0.2, atol=1e-7)


def test_softmax_rows_sum_to_one(rng: np.random.Generator) -> None:
    """Softmax output sums to one along its axis."""
    out = ops.softmax(_const(rng.normal(scale=5.0, size=(4, 6, 3, 3))), axis=1)
    np.testing.assert_allclose(out.data.sum(axis=1), 1.0, atol=1e-6)


def test_sigmoid_of_zero_is_half() -> None:
    """sigmoid(0) is exactly one half."""
    assert ops.sigmoid(_const([0.0])).data[0] == 0.5


def test_instance_norm_of_constant_channel_is_zero() -> None:
    """A constant channel normalizes to zeros."""
    x = np.zeros((1, 2, 4, 4))
    x[0, 0] = 3.0
    x[0, 1] = -7.5
    out = ops.instance_norm(_const(x))
    np.testing.assert_allclose(out.data, 0.0, atol=1e-6)


def test_layer_norm_slices_have_zero_mean_unit_variance(
    float64: None, rng: np.random.Generator
) -> None:
    """Each normalized slice has mean zero and variance one."""
    out = ops.layer_norm(_const(rng.normal(2.0, 4.0, size=(3, 5, 16))), -1, 1e-12)
    np.testing.assert_allclose(out.data.mean(axis=-1), 0.0, atol=1e-5)
    np.testing.assert_allclose(out.data.var(axis=-1), 1.0, atol=1e-5)


@pytest.mark.parametrize("eps", [0.0, -1e-5])
def test_normalization_rejects_non_positive_eps(eps: float) -> None:
    """eps must be strictly positive."""
    with pytest.raises(ValidationError, match="eps must be positive"):
        ops.layer_norm(_const(np.ones((2, 3))), -1, eps)


def test_maximum_and_clamp_min_are_elementwise() -> None:
    """maximum picks the larger operand and clamp_min applies a floor."""
    a = _const([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(ops.maximum(a, _const([0.0, 0.0, 5.0])).data, [1.0, 0.0, 5.0])
    np.testing.assert_array_equal(ops.clamp_min(a, 0.5).data, [1.0, 0.5, 3.0])
    np.testing.assert_array_equal(ops.abs(a).data, [1.0, 2.0, 3.0])


def test_leaky_relu_scales_negative_side() -> None:
    """Negative inputs are multiplied by the slope."""
    out = ops.leaky_relu(_const([-2.0, 0.0, 3.0]), 0.1)
    np.testing.assert_allclose(out.data, [-0.2, 0.0, 3.0])


UNARY_OPS: dict[str, Callable[[Tensor], Tensor]] = {
    "exp": ops.exp,
    "sigmoid": ops.sigmoid,
    "silu": ops.silu,
    "leaky_relu": lambda t: ops.leaky_relu(t, 0.01),
    "softmax": lambda t: ops.softmax(t, axis=1),
    "log_softmax": lambda t: ops.log_softmax(t, axis=1),
    "layer_norm": lambda t: ops.layer_norm(t, -1, 1e-5),
    "instance_norm": lambda t: ops.instance_norm(t, 1e-5),
    "abs": ops.abs,
    "cumsum": lambda t: ops.cumsum(t, axis=2),
    "flip": lambda t: ops.flip(t, (1, 3)),
    "transpose": lambda t: ops.transpose(t, (3, 1, 0, 2)),
    "getitem": lambda t: t[:, 1:, ::2],
    "pad": lambda t: ops.pad(t, [(0, 0), (1, 0), (0, 2), (1, 1)]),
}


@pytest.mark.parametrize("name", sorted(UNARY_OPS))
def test_unary_op_gradients_match_finite_differences(
    float64: None, rng: np.random.Generator, name: str
) -> None:
    """Every differentiable op passes a 64-bit central-difference check."""
    x = parameter(rng.normal(size=(2, 3, 4, 5)), name="x")
    weights = _const(rng.normal(size=UNARY_OPS[name](_const(x.data)).shape))
    report = check_gradients(
        lambda: ops.sum(UNARY_OPS[name](x) * weights), [("x", x)], samples=60, name=name
    )
    assert report.passed, report


def test_binary_op_gradients_with_broadcasting(float64: None, rng: np.random.Generator) -> None:
    """add, mul, div and maximum route gradients through broadcast axes."""
    a = parameter(rng.normal(size=(3, 4)), name="a")
    b = parameter(rng.normal(size=(1, 4)) + 3.0, name="b")
    c = parameter(rng.normal(size=(4,)), name="c")

    def loss() -> Tensor:
        return ops.sum((a + c) * b / (b * b + 1.0)) + ops.sum(ops.maximum(a, c) * a)

    report = check_gradients(loss, [("a", a), ("b", b), ("c", c)], samples=30)
    assert report.passed, report


def test_conv_gradients_match_finite_differences(float64: None, rng: np.random.Generator) -> None:
    """Strided, padded convolutions and their transposes pass the gradient check."""
    x = parameter(rng.normal(size=(2, 2, 6, 6)), name="x")
    w = parameter(rng.normal(size=(3, 2, 3, 3)), name="w")
    b = parameter(rng.normal(size=3), name="b")
    up = parameter(rng.normal(size=(3, 2, 2, 2)), name="up")
    target = _const(rng.normal(size=(2, 2, 6, 6)))

    def loss() -> Tensor:
        down = ops.conv2d(x, w, b, stride=2, padding=1)
        return ops.sum(ops.transposed_conv2d(down, up, stride=2) * target)

    report = check_gradients(loss, [("x", x), ("w", w), ("b", b), ("up", up)], samples=80)
    assert report.passed, report


def test_backward_of_sum_is_ones() -> None:
    """d sum(x) / dx is one everywhere."""
    x = parameter(np.arange(6.0).reshape(2, 3))
    backward(ops.sum(x))
    np.testing.assert_array_equal(x.grad, np.ones((2, 3)))


def test_full_reductions_are_zero_dimensional() -> None:
    """Reducing every axis gives a shape-() tensor, as do constants built from floats."""
    x = parameter(np.ones(3))
    assert ops.sum(x).shape == ()
    assert ops.mean(x).shape == ()
    assert (1.0 - ops.mean(x)).shape == ()
    assert ops.sum(x, axis=0, keepdims=True).shape == (1,)
    assert Tensor(2.5).shape == ()


def test_backward_through_chained_scalar_ops() -> None:
    """A loss built from several full reductions still propagates to the leaf."""
    x = parameter(np.arange(4.0).reshape(2, 2))
    loss = 1.0 - ops.mean(x) + ops.sum(x * x) * 0.5
    backward(loss)
    np.testing.assert_allclose(x.grad, x.data - 0.25)


def test_item_reads_one_element_tensors_only() -> None:
    """item() returns the scalar value and rejects larger tensors."""
    assert ops.sum(_const([1.0, 2.0])).item() == 3.0
    assert _const([[4.0]]).item() == 4.0
    with pytest.raises(ValidationError, match=r"one-element.*\(2,\)"):
        _const([1.0, 2.0]).item()


def test_backward_of_square_at_three_is_six() -> None:
    """d sum(x^2) / dx at three is six."""
    x = parameter(np.array([3.0]))
    backward(ops.sum(x * x))
    np.testing.assert_array_equal(x.grad, [6.0])


def test_backward_accumulates_until_zeroed() -> None:
    """A second backward adds to the stored gradient."""
    x = parameter(np.array([1.0, 2.0]))
    backward(ops.sum(x * 2.0))
    backward(ops.sum(x * 2.0))
    np.testing.assert_array_equal(x.grad, [4.0, 4.0])
    x.zero_grad()
    assert x.grad is None


def test_backward_rejects_non_scalar_loss() -> None:
    """Only scalar losses can be differentiated."""
    x = parameter(np.ones(3))
    with pytest.raises(ContractError, match="scalar"):
        backward(x * 2.0)


def test_backward_rejects_constant_loss() -> None:
    """A loss with no trainable input is a contract error."""
    with pytest.raises(ContractError):
        backward(ops.sum(_const(np.ones(3))))


def test_tape_is_topologically_ordered() -> None:
    """Every recorded node appears after its inputs."""
    x = parameter(np.ones((2, 2)))
    y = ops.exp(x) * x
    tape = ComputationTape.record(ops.sum(y @ y))
    position = {id(node): i for i, node in enumerate(tape.nodes)}
    for node in tape.nodes:
        for parent in node._parents:
            assert position[id(parent)] < position[id(node)]
    assert list(tape.leaves()) == [x]


def test_no_grad_records_nothing() -> None:
    """Operations inside no_grad produce untracked tensors."""
    x = parameter(np.ones(2))
    with no_grad():
        y = ops.sum(x * 3.0)
    assert not y.requires_grad
    assert y.is_leaf


def test_non_finite_values_raise_numeric_error() -> None:
    """NaN or overflow is an error, never a silent state."""
    with pytest.raises(NumericError):
        Tensor(np.array([1.0, np.nan]))
    with pytest.raises(NumericError, match="exp"):
        ops.exp(_const([1e4]))


def test_empty_extent_is_rejected() -> None:
    """Tensors need positive extents."""
    with pytest.raises(DimensionError):
        Tensor(np.zeros((0, 3)))


@pytest.mark.parametrize(
    ("call", "pattern"),
    [
        (lambda: ops.add(_const(np.ones((2, 3))), _const(np.ones((4,)))), "do not broadcast"),
        (lambda: ops.reshape(_const(np.ones(6)), (4, 2)), "cannot reshape"),
        (lambda: ops.transpose(_const(np.ones((2, 3))), (0, 0)), "not a permutation"),
        (lambda: ops.stack([_const(np.ones(2)), _const(np.ones(3))]), "different shapes"),
        (lambda: ops.sum(_const(np.ones(2)), axis=3), "out of range"),
    ],
)
def test_shape_errors_are_dimension_errors(call: Callable[[], Tensor], pattern: str) -> None:
    """Shape algebra either returns the documented shape or raises."""
    with pytest.raises(DimensionError, match=pattern):
        call()


def test_precision_context_controls_dtype() -> None:
    """New tensors follow the active precision."""
    assert _const([1.0]).dtype == np.float32
    with precision("float64"):
        assert _const([1.0]).dtype == np.float64
    assert parameter(np.ones(2)).dtype == np.float32
    with pytest.raises(ValidationError, match="precision"):
        with precision("float16"):
            pass


def test_forward_is_deterministic(rng: np.random.Generator) -> None:
    """Identical inputs produce bit-identical outputs."""
    x = rng.normal(size=(1, 2, 6, 6))
    w = rng.normal(size=(3, 2, 3, 3))
    first = ops.softmax(ops.conv(_const(x), _const(w), padding=1), axis=1)
    second = ops.softmax(ops.conv(_const(x), _const(w), padding=1), axis=1)
    np.testing.assert_array_equal(first.data, second.data)


def test_relative_error_uses_floor() -> None:
    """Tiny gradients are compared against the floor, not each other."""
    assert relative_error(0.0, 1e-9, floor=1e-6) == pytest.approx(1e-3)
    assert relative_error(2.0, 1.0) == pytest.approx(0.5)
