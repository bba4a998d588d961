from __future__ import annotations

from typing import Literal, Protocol, runtime_checkable

import numpy as np
from numpy.typing import NDArray

PrecisionName = Literal["float32", "float64"]
Split = Literal["train", "val", "test"]

FloatArray = NDArray[np.floating]
IntArray = NDArray[np.integer]


@runtime_checkable
class SegmentationPredictor(Protocol):
    """Anything that maps a batch of images to integer label maps.

    ``images`` has shape ``(B, C, *spatial)``; the result has shape ``(B, *spatial)``.
    """

    def predict(self, images: FloatArray) -> IntArray: ...
