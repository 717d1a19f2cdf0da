"""
Pillar library: the 32 precomputed deformation maps and their FSMP file codec.

File layout (little-endian): magic b'FSMP', version u32, height u32,
width u32, then 32 records of class_index u32, substeps u32 and the
height x width x 2 backward grid as f64.
"""
import logging
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import MapLibraryError
from .forward import (
    CLASS_TABLE,
    NUM_CLASSES,
    ChannelSpec,
    DeformationMap,
    MapGenParams,
    build_map,
    pillar_config,
)

logger = logging.getLogger(__name__)

MAGIC = b'FSMP'
VERSION = 1
_HEADER = struct.Struct('<4sIII')
_RECORD = struct.Struct('<II')


@dataclass(frozen=True, eq=False)
class PillarLibrary:
    """
    Read-only collection of the 32 deformation maps of one channel.

    Attributes:
        channel (ChannelSpec): Geometry every map was built for.
        maps (tuple[DeformationMap, ...]): Maps in class order 1..32.
    """
    channel: ChannelSpec
    maps: tuple

    def __post_init__(self):
        if len(self.maps) != NUM_CLASSES:
            raise MapLibraryError(f'expected {NUM_CLASSES} maps, got {len(self.maps)}')
        for slot, deformation in enumerate(self.maps, start=1):
            if deformation.class_index != slot:
                raise MapLibraryError(
                    f'map in slot {slot} belongs to class {deformation.class_index}'
                )
            if deformation.backward_grid.shape != (*self.channel.shape, 2):
                raise MapLibraryError(
                    f'map {slot} has grid {deformation.backward_grid.shape}, '
                    f'channel needs {(*self.channel.shape, 2)}'
                )
            grid = deformation.backward_grid
            if (grid.min() < 0 or grid[..., 0].max() > self.channel.height_px - 1
                    or grid[..., 1].max() > self.channel.width_px - 1):
                raise MapLibraryError(f'map {slot} points outside the channel')
        # shared between worker threads, so freeze the arrays
        for deformation in self.maps:
            deformation.backward_grid.setflags(write=False)

    @classmethod
    def build(cls, channel=None, params=None):
        channel = channel or ChannelSpec()
        params = params or MapGenParams()
        logger.info(
            'building %d maps for %dx%d channel (amplitude=%s, kappa=%s, substeps=%d)',
            NUM_CLASSES, channel.height_px, channel.width_px,
            params.amplitude, params.width_scale, params.substeps,
        )
        maps = tuple(build_map(config, channel, params) for config in CLASS_TABLE)
        return cls(channel=channel, maps=maps)

    @property
    def configs(self):
        return CLASS_TABLE

    def grid(self, index):
        return self.maps[pillar_config(index).index - 1].backward_grid


def library_to_bytes(library):
    height, width = library.channel.shape
    parts = [_HEADER.pack(MAGIC, VERSION, height, width)]
    for deformation in library.maps:
        parts.append(_RECORD.pack(deformation.class_index, deformation.substeps))
        parts.append(np.ascontiguousarray(deformation.backward_grid, dtype='<f8').tobytes())
    return b''.join(parts)


def library_from_bytes(data, inlet_fraction=0.25):
    """
    Decodes an FSMP map library.

    Args:
        data (bytes): File contents.
        inlet_fraction (float): Stripe width of the channel; not stored in the file.
    Returns:
        PillarLibrary: The decoded library.
    Raises:
        MapLibraryError: On bad magic, unknown version, truncation or non-finite grids.
    """
    if len(data) < _HEADER.size:
        raise MapLibraryError('map library is truncated (no header)')
    magic, version, height, width = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise MapLibraryError(f'not a map library (magic {magic!r})')
    if version != VERSION:
        raise MapLibraryError(f'unsupported map library version {version}')
    channel = ChannelSpec(height_px=height, width_px=width, inlet_fraction=inlet_fraction)
    grid_bytes = height * width * 2 * 8
    expected = _HEADER.size + NUM_CLASSES * (_RECORD.size + grid_bytes)
    if len(data) != expected:
        raise MapLibraryError(
            f'map library has {len(data)} bytes, expected {expected}'
        )
    offset = _HEADER.size
    maps = []
    for _ in range(NUM_CLASSES):
        class_index, substeps = _RECORD.unpack_from(data, offset)
        offset += _RECORD.size
        grid = np.frombuffer(data, dtype='<f8', count=height * width * 2, offset=offset)
        offset += grid_bytes
        grid = grid.astype(np.float64).reshape(height, width, 2)
        try:
            maps.append(DeformationMap(class_index=class_index, backward_grid=grid, substeps=substeps))
        except ValueError as exc:
            raise MapLibraryError(str(exc)) from exc
    return PillarLibrary(channel=channel, maps=tuple(maps))
