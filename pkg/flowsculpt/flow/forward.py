"""
Forward model: maps a pillar sequence to the sculpted flow-shape raster.

Each of the 32 pillar classes owns a backward deformation map that sends
every pixel of the deformed cross-section to the continuous position it was
advected from. Maps compose without interaction terms, so the shape behind
a sequence is the undeformed inlet stripe sampled once through the chained
backward maps.

Coordinates: rows run across the channel height, columns across its width.
The stream function lives on y in [-0.5, 0.5] (width, centred) and z in
[0, 1] (height).
"""
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import map_coordinates

from .exceptions import ChannelSpecError, InvalidPillarError

logger = logging.getLogger(__name__)

NUM_CLASSES = 32
MAX_SEQUENCE_LENGTH = 20

# Frozen class enumeration: position varies fastest at fixed diameter.
# Position 0.5 is identified with -0.5 (the wall class).
POSITIONS = (0.0, 0.125, 0.25, 0.375, -0.5, -0.375, -0.25, -0.125)
DIAMETERS = (0.375, 0.5, 0.625, 0.25)

FlowShape = np.ndarray
PillarSequence = Sequence[int]


@dataclass(frozen=True)
class ChannelSpec:
    """
    Raster geometry of the channel cross-section.

    Attributes:
        height_px (int): Rows of the raster.
        width_px (int): Columns of the raster.
        inlet_fraction (float): Width fraction covered by the centred inlet stripe.
    """
    height_px: int = 12
    width_px: int = 100
    inlet_fraction: float = 0.25

    def __post_init__(self):
        if self.height_px < 2 or self.width_px < 2:
            raise ChannelSpecError(
                f'channel must be at least 2x2 pixels, got '
                f'{self.height_px}x{self.width_px}'
            )
        if not 0 < self.inlet_fraction <= 1:
            raise ChannelSpecError(
                f'inlet_fraction must lie in (0, 1], got {self.inlet_fraction}'
            )
        if self.inlet_fraction * self.width_px < 1:
            raise ChannelSpecError('inlet stripe is narrower than one pixel')

    @property
    def shape(self):
        return (self.height_px, self.width_px)

    @property
    def stripe_columns(self):
        """
        First and last column of the undeformed stripe (inclusive).
        """
        f = self.inlet_fraction
        lo = math.floor(self.width_px * (1 - f) / 2)
        hi = math.floor(self.width_px * (1 + f) / 2) - 1
        return lo, hi


@dataclass(frozen=True)
class PillarConfig:
    index: int
    position: float
    diameter: float

    def __post_init__(self):
        if not 1 <= self.index <= NUM_CLASSES:
            raise InvalidPillarError(f'pillar index {self.index} outside 1..{NUM_CLASSES}')
        if not -0.5 <= self.position <= 0.5:
            raise InvalidPillarError(f'pillar position {self.position} outside [-0.5, 0.5]')
        if self.diameter <= 0:
            raise InvalidPillarError(f'pillar diameter must be positive, got {self.diameter}')

    @property
    def on_wall(self):
        return abs(self.position) == 0.5


@dataclass(frozen=True)
class MapGenParams:
    """
    Parameters of the synthetic dipole displacement field.

    Attributes:
        amplitude (float): Stream function strength; 0 gives the identity map.
        width_scale (float): Gaussian width relative to the pillar diameter (kappa).
        substeps (int): Explicit integration sub-steps per map.
    """
    amplitude: float = 0.14
    width_scale: float = 0.5
    substeps: int = 4

    def __post_init__(self):
        if self.amplitude < 0:
            raise ChannelSpecError(f'amplitude must be non-negative, got {self.amplitude}')
        if self.width_scale <= 0:
            raise ChannelSpecError(f'width_scale must be positive, got {self.width_scale}')
        if self.substeps < 1:
            raise ChannelSpecError(f'substeps must be at least 1, got {self.substeps}')


@dataclass(frozen=True, eq=False)
class DeformationMap:
    """
    Backward map of one pillar class.

    Attributes:
        class_index (int): Pillar class, 1..32.
        backward_grid (np.ndarray): (height, width, 2) source (row, col) per pixel.
        substeps (int): Integration sub-steps used to build the grid.
    """
    class_index: int
    backward_grid: np.ndarray
    substeps: int

    def __post_init__(self):
        grid = self.backward_grid
        if grid.ndim != 3 or grid.shape[2] != 2:
            raise ChannelSpecError(f'backward grid must be (H, W, 2), got {grid.shape}')
        if not np.all(np.isfinite(grid)):
            raise ChannelSpecError(f'backward grid of class {self.class_index} is not finite')


def class_table():
    """
    Returns the 32 pillar classes in index order.
    """
    table = []
    for d_slot, diameter in enumerate(DIAMETERS):
        for p_slot, position in enumerate(POSITIONS):
            table.append(PillarConfig(
                index=d_slot * len(POSITIONS) + p_slot + 1,
                position=position,
                diameter=diameter,
            ))
    return table


CLASS_TABLE = tuple(class_table())


def pillar_config(index):
    if not isinstance(index, (int, np.integer)) or not 1 <= index <= NUM_CLASSES:
        raise InvalidPillarError(f'pillar index {index!r} outside 1..{NUM_CLASSES}')
    return CLASS_TABLE[int(index) - 1]


def mirror_index(index):
    """
    Returns the class whose pillar sits at the mirrored lateral position.
    """
    config = pillar_config(index)
    position = config.position if config.on_wall else -config.position
    for candidate in CLASS_TABLE:
        if candidate.diameter == config.diameter and candidate.position == position:
            return candidate.index
    raise InvalidPillarError(f'class {index} has no mirror partner')


def mirror_sequence(sequence):
    return [mirror_index(index) for index in sequence]


def validate_sequence(sequence):
    """
    Checks every entry of a pillar sequence.

    Raises:
        InvalidPillarError: Naming the first offending position.
    """
    for position, index in enumerate(sequence):
        if not isinstance(index, (int, np.integer)) or not 1 <= index <= NUM_CLASSES:
            raise InvalidPillarError(
                f'invalid pillar {index!r} at sequence position {position}',
                position=position,
            )


def _dipole(y, z, position, diameter, params):
    sigma = params.width_scale * diameter
    d = (y - position) / sigma
    envelope = np.exp(-0.5 * d * d)
    strength = params.amplitude * diameter ** 1.5
    dy = strength * d * envelope * np.pi * np.cos(np.pi * z)
    dz = -strength * np.sin(np.pi * z) * envelope * (1.0 - d * d) / sigma
    return dy, dz


def displacement(y, z, config, params):
    """
    Displacement (dy, dz) = (d psi / dz, -d psi / dy) of one pillar class,
    in domain units.

    psi = A D^1.5 ((y - p) / (k D)) exp(-(y - p)^2 / (2 (k D)^2)) sin(pi z)
    is odd under (y, p) -> (-y, -p), so mirrored classes give mirrored
    fields. The wall class sums the dipoles centred on both walls.
    """
    if config.on_wall:
        left = _dipole(y, z, -0.5, config.diameter, params)
        right = _dipole(y, z, 0.5, config.diameter, params)
        return left[0] + right[0], left[1] + right[1]
    return _dipole(y, z, config.position, config.diameter, params)


def identity_grid(channel):
    rows, cols = np.meshgrid(
        np.arange(channel.height_px, dtype=np.float64),
        np.arange(channel.width_px, dtype=np.float64),
        indexing='ij',
    )
    return np.stack([rows, cols], axis=-1)


def build_map(config, channel, params):
    """
    Integrates the negated displacement field into a backward grid.

    Args:
        config (PillarConfig): Pillar class to build.
        channel (ChannelSpec): Raster geometry.
        params (MapGenParams): Field parameters.
    Returns:
        DeformationMap: Grid of source coordinates, clamped to the channel.
    """
    if config.diameter <= 0:
        raise InvalidPillarError(f'pillar diameter must be positive, got {config.diameter}')
    height, width = channel.shape
    centre = (width - 1) / 2
    grid = identity_grid(channel)
    rows, cols = grid[..., 0], grid[..., 1]
    step = 1.0 / params.substeps
    for _ in range(params.substeps):
        y = (cols - centre) / (width - 1)
        z = rows / (height - 1)
        dy, dz = displacement(y, z, config, params)
        cols = np.clip(cols - step * dy * (width - 1), 0.0, width - 1)
        rows = np.clip(rows - step * dz * (height - 1), 0.0, height - 1)
    return DeformationMap(
        class_index=config.index,
        backward_grid=np.stack([rows, cols], axis=-1),
        substeps=params.substeps,
    )


def initial_shape(channel):
    """
    Undeformed inlet: a full-height stripe centred across the width.
    """
    lo, hi = channel.stripe_columns
    shape = np.zeros(channel.shape, dtype=np.uint8)
    shape[:, lo:hi + 1] = 1
    return shape


def lookup(grid, coordinates):
    """
    Bilinear lookup of a coordinate grid at continuous (row, col) positions.

    Args:
        grid (np.ndarray): (H, W, 2) grid to sample.
        coordinates (np.ndarray): (..., 2) positions inside the grid's domain.
    Returns:
        np.ndarray: (..., 2) interpolated grid values.
    """
    where = [coordinates[..., 0], coordinates[..., 1]]
    return np.stack([
        map_coordinates(grid[..., 0], where, order=1, mode='nearest'),
        map_coordinates(grid[..., 1], where, order=1, mode='nearest'),
    ], axis=-1)


def compose(sequence, library):
    """
    Chains backward grids: last pillar first, then back to the first one.

    Args:
        sequence (Sequence[int]): Pillar indices in application order.
        library (PillarLibrary): The 32 deformation maps.
    Returns:
        np.ndarray: (H, W, 2) composed backward grid.
    Raises:
        InvalidPillarError: If an index is outside the class table.
    """
    validate_sequence(sequence)
    if len(sequence) == 0:
        return identity_grid(library.channel)
    grid = library.grid(sequence[-1]).copy()
    for index in reversed(sequence[:-1]):
        grid = lookup(library.grid(index), grid)
    return grid


def shape_from_grid(grid, channel, threshold=0.5):
    """
    Samples the continuous inlet stripe [lo, hi + 1) through a backward grid.
    """
    lo, hi = channel.stripe_columns
    cols = grid[..., 1]
    occupancy = ((cols >= lo) & (cols < hi + 1)).astype(np.float64)
    return (occupancy >= threshold).astype(np.uint8)


def render(sequence, library):
    """
    Renders the flow shape produced by a pillar sequence.
    """
    return shape_from_grid(compose(sequence, library), library.channel)


def render_frames(sequence, library):
    """
    Renders every prefix of a sequence, from the empty one to the full one.
    """
    return [render(list(sequence[:n]), library) for n in range(len(sequence) + 1)]
