"""
FSNN checkpoint codec.

Layout (little-endian): magic b'FSNN', version u32, architecture tag
(u32 length + UTF-8), loss code u8 + head count u32, input shape (u32 rank
+ u32 extents), layer count u32, per-layer descriptors (kind u8, u32 count
+ i64 config values; tower layers follow with u32 layer count per tower and
their own descriptors), parameter count u32, per parameter (u32 rank,
u32 extents, f64 data), then metadata: epochs u32, best validation metric
f64, seed u64.
"""
import math
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import CheckpointError, ShapeMismatchError
from .layers import TOWERS, layer_from_config
from .network import Network, loss_from_code

MAGIC = b'FSNN'
VERSION = 1


@dataclass
class Checkpoint:
    """
    A network plus the metadata of the run that produced it.

    Attributes:
        network (Network): Architecture and parameters.
        epochs (int): Epochs run.
        best_metric (float): Best validation loss (NaN if never validated).
        seed (int): Training seed.
    """
    network: Network
    epochs: int = 0
    best_metric: float = math.nan
    seed: int = 0

    @property
    def tag(self):
        return self.network.tag


def _pack_layers(layers, parts):
    parts.append(struct.pack('<I', len(layers)))
    for layer in layers:
        config = layer.config()
        parts.append(struct.pack('<BI', layer.kind, len(config)))
        parts.append(struct.pack(f'<{len(config)}q', *config))
        if layer.kind == TOWERS:
            for tower in layer.towers:
                _pack_layers(tower, parts)


def save(checkpoint):
    """
    Serialises a checkpoint to bytes.
    """
    net = checkpoint.network
    tag = net.tag.encode('utf-8')
    parts = [
        MAGIC,
        struct.pack('<I', VERSION),
        struct.pack('<I', len(tag)), tag,
        struct.pack('<BI', net.loss.code, net.loss.heads),
        struct.pack('<I', len(net.input_shape)),
        struct.pack(f'<{len(net.input_shape)}I', *net.input_shape),
    ]
    _pack_layers(net.layers, parts)
    params = net.parameters()
    parts.append(struct.pack('<I', len(params)))
    for param in params:
        parts.append(struct.pack(f'<I{param.ndim}I', param.ndim, *param.shape))
        parts.append(np.ascontiguousarray(param, dtype='<f8').tobytes())
    parts.append(struct.pack('<IdQ', checkpoint.epochs, checkpoint.best_metric, checkpoint.seed))
    return b''.join(parts)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise CheckpointError('checkpoint is truncated')
        values = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return values

    def array(self, shape):
        count = int(np.prod(shape))
        if self.offset + 8 * count > len(self.data):
            raise CheckpointError('checkpoint is truncated')
        values = np.frombuffer(self.data, dtype='<f8', count=count, offset=self.offset)
        self.offset += 8 * count
        return values.astype(np.float64).reshape(shape)


def _read_layers(reader):
    (count,) = reader.take('<I')
    layers = []
    for _ in range(count):
        kind, size = reader.take('<BI')
        config = reader.take(f'<{size}q')
        towers = None
        if kind == TOWERS:
            towers = [_read_layers(reader) for _ in range(config[0])]
        try:
            layers.append(layer_from_config(kind, config, towers))
        except (ValueError, TypeError, IndexError) as exc:
            raise CheckpointError(f'bad layer descriptor: {exc}') from exc
    return layers


def load(data):
    """
    Rebuilds a checkpoint from bytes.

    Raises:
        CheckpointError: On bad magic, unknown version, truncation or
            descriptors that do not match the stored parameters.
    """
    reader = _Reader(data)
    (magic,) = reader.take('<4s')
    if magic != MAGIC:
        raise CheckpointError(f'not a checkpoint (magic {magic!r})')
    (version,) = reader.take('<I')
    if version != VERSION:
        raise CheckpointError(f'unsupported checkpoint version {version}')
    (tag_length,) = reader.take('<I')
    (tag,) = reader.take(f'<{tag_length}s')
    loss_code, heads = reader.take('<BI')
    (rank,) = reader.take('<I')
    input_shape = reader.take(f'<{rank}I')
    layers = _read_layers(reader)
    try:
        net = Network(input_shape, layers, loss_from_code(loss_code, heads), tag=tag.decode('utf-8'))
    except (ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f'checkpoint architecture is invalid: {exc}') from exc
    (count,) = reader.take('<I')
    arrays = []
    for _ in range(count):
        (ndim,) = reader.take('<I')
        shape = reader.take(f'<{ndim}I')
        arrays.append(reader.array(shape))
    try:
        net.load_parameters(arrays)
    except ShapeMismatchError as exc:
        raise CheckpointError(f'parameters do not fit the architecture: {exc}') from exc
    epochs, best_metric, seed = reader.take('<IdQ')
    if reader.offset != len(data):
        raise CheckpointError('trailing bytes after checkpoint metadata')
    return Checkpoint(network=net, epochs=epochs, best_metric=best_metric, seed=seed)
