import math
from dataclasses import dataclass

import numpy as np

from .exceptions import MetricInputError

# Gate used when picking evaluation targets.
TEST_GATE = 3.5


@dataclass(frozen=True)
class ComplexityReport:
    """
    Attributes:
        perimeter (int): Exposed 4-connected pixel edges.
        area (int): Fluid pixel count.
        complexity (float): perimeter^2 / (4 pi area).
    """
    perimeter: int
    area: int
    complexity: float

    @property
    def passes_gate(self):
        return self.complexity > TEST_GATE


def perimetric_complexity(shape):
    """
    Counts fluid-pixel edges facing background or the image border.

    Raises:
        MetricInputError: If the shape has no fluid pixel.
    """
    pixels = (np.asarray(shape) != 0).astype(np.int8)
    if pixels.ndim != 2:
        raise MetricInputError(f'shape must be 2-D, got {pixels.shape}')
    area = int(pixels.sum())
    if area == 0:
        raise MetricInputError('complexity of an empty shape is undefined')
    padded = np.pad(pixels, 1)
    perimeter = int(np.abs(np.diff(padded, axis=0)).sum() + np.abs(np.diff(padded, axis=1)).sum())
    return ComplexityReport(perimeter, area, perimeter * perimeter / (4 * math.pi * area))
