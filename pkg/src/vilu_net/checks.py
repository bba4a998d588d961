"""Finite-difference gradient suite run in 64-bit precision."""

from __future__ import annotations

import numpy as np

from .autodiff import ops
from .autodiff.gradcheck import GradcheckReport, check_gradients
from .autodiff.module import parameter
from .autodiff.tensor import Tensor, precision
from .metrics.losses import combined_loss
from .mlstm.block import ViLBlock
from .model.config import NetworkConfig
from .model.vilu import ViLUNet
from .utils.logging import get_logger

log = get_logger("checks")

TINY_NETWORK = NetworkConfig(
    in_channels=1,
    num_classes=2,
    base_channels=4,
    num_stages=2,
    vil_blocks_per_stage=2,
    num_heads=2,
    chunk_size=4,
)


def _ops_check(rng: np.random.Generator, samples: int, tolerance: float) -> GradcheckReport:
    x = parameter(rng.normal(size=(2, 3, 6, 6)), name="x")
    w = parameter(rng.normal(0.0, 0.3, size=(4, 3, 3, 3)), name="w")
    b = parameter(rng.normal(size=4), name="b")
    up = parameter(rng.normal(0.0, 0.3, size=(4, 2, 2, 2)), name="up")
    weights = rng.normal(size=(2, 2, 12, 12))

    def loss() -> Tensor:
        y = ops.leaky_relu(ops.instance_norm(ops.conv(x, w, b, padding=1)), 0.01)
        z = ops.conv_transpose(y, up, stride=2)
        return ops.mean(ops.softmax(z, axis=1) * weights) + ops.mean(y * y)

    params = [("x", x), ("w", w), ("b", b), ("up", up)]
    return check_gradients(
        loss,
        params,
        samples=samples,
        tolerance=tolerance,
        name="ops",
        seed=int(rng.integers(2**31)),
    )


def _block_check(rng: np.random.Generator, samples: int, tolerance: float) -> GradcheckReport:
    block = ViLBlock(8, num_heads=2, rng=rng)
    x = parameter(rng.normal(size=(1, 8, 8)), name="x")

    def loss() -> Tensor:
        return ops.mean(block(x, chunk_size=4)) + ops.mean(block(x, True, chunk_size=None))

    params = [("x", x), *block.named_parameters()]
    return check_gradients(
        loss,
        params,
        samples=samples,
        tolerance=tolerance,
        name="vil_block",
        seed=int(rng.integers(2**31)),
    )


def _network_check(
    rng: np.random.Generator, samples: int, tolerance: float, config: NetworkConfig
) -> GradcheckReport:
    model = ViLUNet(config, seed=int(rng.integers(2**31)))
    extent = 8 * config.divisor
    shape = (1, config.in_channels) + (extent,) * config.spatial_rank
    images = rng.normal(size=shape)
    labels = rng.integers(0, config.num_classes, size=(1,) + shape[2:])

    def loss() -> Tensor:
        return combined_loss(model(images), labels)

    return check_gradients(
        loss,
        list(model.named_parameters()),
        samples=samples,
        tolerance=tolerance,
        name="network",
        seed=int(rng.integers(2**31)),
    )


def run_gradcheck_suite(
    *,
    samples: int = 50,
    seed: int = 0,
    tolerance: float = 1e-4,
    config: NetworkConfig = TINY_NETWORK,
) -> list[GradcheckReport]:
    """
    Check primitive ops, one ViL block and an end-to-end network.

    ``samples`` parameter entries are drawn per check. The network input is
    ``8 * 2**(num_stages - 1)`` voxels per axis, so the default config sees 16x16.
    """
    rng = np.random.default_rng(seed)
    with precision("float64"):
        reports = [
            _ops_check(rng, samples, tolerance),
            _block_check(rng, samples, tolerance),
            _network_check(rng, samples, tolerance, config),
        ]
    for report in reports:
        log.info(
            "gradcheck %-9s checked=%d max_rel_error=%.3e %s",
            report.name,
            report.checked,
            report.max_rel_error,
            "ok" if report.passed else "FAILED",
        )
    return reports


__all__ = ["TINY_NETWORK", "run_gradcheck_suite"]
