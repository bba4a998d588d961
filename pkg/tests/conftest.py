"""Shared fixtures."""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np
import pytest

from vilu_net.autodiff import precision
from vilu_net.model import NetworkConfig


@pytest.fixture
def float64() -> Iterator[None]:
    """Run the test body with 64-bit tensors."""
    with precision("float64"):
        yield


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config() -> NetworkConfig:
    """Two stages, four base channels: small enough for finite differences."""
    return NetworkConfig(base_channels=4, num_stages=2, num_heads=2, chunk_size=4)
