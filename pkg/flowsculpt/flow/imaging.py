"""
Binary PGM (P5) codec for flow-shape rasters, built on Pillow.
"""
import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import ImageFormatError

FLUID = 255


def shape_to_pgm(shape):
    """
    Encodes a binary raster as P5 PGM bytes, fluid = 255, background = 0.
    """
    pixels = np.asarray(shape)
    if pixels.ndim != 2:
        raise ImageFormatError(f'flow shape must be 2-D, got shape {pixels.shape}')
    image = Image.fromarray((pixels != 0).astype(np.uint8) * FLUID)
    buffer = io.BytesIO()
    image.save(buffer, format='PPM')
    return buffer.getvalue()


def shape_from_pgm(data):
    """
    Decodes PGM (or PBM) bytes into a binary raster.

    Pixels at or above half the 8-bit range count as fluid.

    Raises:
        ImageFormatError: If the data is not a greyscale Netpbm image.
    """
    try:
        image = Image.open(io.BytesIO(data))
        image.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageFormatError(f'cannot read image: {exc}') from exc
    if image.format != 'PPM':
        raise ImageFormatError(f'expected a PGM image, got {image.format}')
    if image.mode == '1':
        image = image.convert('L')
    if image.mode != 'L':
        raise ImageFormatError(f'expected 8-bit greyscale, got mode {image.mode}')
    return (np.asarray(image) >= 128).astype(np.uint8)


def read_shape(path):
    with open(path, 'rb') as handle:
        return shape_from_pgm(handle.read())
