"""
Dataset container and the FSDS file codec.

File layout (little-endian): magic b'FSDS', version u32, kind u8, count u64,
per-sample pixel rank u32 and extents u32, labels per sample u32, then
`count` records of the pixel block (u8, 0 or 1) followed by the labels
(u16).
"""
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import DatasetFormatError

MAGIC = b'FSDS'
VERSION = 1

APN, APNC, ITN, SMC = 1, 2, 3, 4

KIND_NAMES = {APN: 'apn', APNC: 'apnc', ITN: 'itn', SMC: 'smc'}
KINDS = {name: kind for kind, name in KIND_NAMES.items()}

_HEADER = struct.Struct('<4sIBQI')


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Supervised samples of one kind.

    Per-sample pixel blocks:
        apn: (29, 100) juxtaposed pre/padding/post raster.
        apnc: (2, 12, 100) pre and post shapes as channels.
        itn: (2, 12, 100) final shape then bridging shape.
        smc: (12, 100) final shape.

    Attributes:
        kind (int): One of APN, APNC, ITN, SMC.
        pixels (np.ndarray): uint8 array (count, *block) of 0/1 values.
        labels (np.ndarray): uint16 array (count, labels per sample); empty for itn.
    """
    kind: int
    pixels: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.kind not in KIND_NAMES:
            raise DatasetFormatError(f'unknown dataset kind {self.kind}')
        if self.labels.ndim != 2 or len(self.labels) != len(self.pixels):
            raise DatasetFormatError(
                f'{len(self.pixels)} pixel blocks but labels of shape {self.labels.shape}'
            )

    def __len__(self):
        return len(self.pixels)

    @property
    def name(self):
        return KIND_NAMES[self.kind]

    def inputs(self):
        """
        Network-ready float64 inputs, channel axis included.
        """
        pixels = self.pixels.astype(np.float64)
        if self.kind == APNC:
            return pixels
        if self.kind == ITN:
            return pixels[:, :1]
        return pixels[:, None]

    def targets(self):
        """
        1-based labels (apn, apnc: (n,), smc: (n, heads)) or flattened
        bridging shapes for itn.
        """
        if self.kind == ITN:
            return self.pixels[:, 1].reshape(len(self), -1).astype(np.float64)
        labels = self.labels.astype(np.int64)
        return labels if self.kind == SMC else labels[:, 0]


def _label_bytes(labels):
    count, label_count = labels.shape
    if label_count == 0:
        return np.zeros((count, 0), dtype=np.uint8)
    return np.ascontiguousarray(labels, dtype='<u2').view(np.uint8).reshape(count, 2 * label_count)


def dataset_to_bytes(dataset):
    block = dataset.pixels.shape[1:]
    label_count = dataset.labels.shape[1]
    header = [
        _HEADER.pack(MAGIC, VERSION, dataset.kind, len(dataset), len(block)),
        struct.pack(f'<{len(block)}I', *block),
        struct.pack('<I', label_count),
    ]
    pixels = np.asarray(dataset.pixels, dtype=np.uint8).reshape(len(dataset), -1)
    records = np.concatenate([pixels, _label_bytes(dataset.labels)], axis=1)
    return b''.join(header) + records.tobytes()


def dataset_from_bytes(data):
    """
    Decodes an FSDS dataset.

    Raises:
        DatasetFormatError: On bad magic, unknown version or kind, a record
            count that does not match the payload, or non-binary pixels.
    """
    if len(data) < _HEADER.size:
        raise DatasetFormatError('dataset is truncated (no header)')
    magic, version, kind, count, rank = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f'not a dataset (magic {magic!r})')
    if version != VERSION:
        raise DatasetFormatError(f'unsupported dataset version {version}')
    if kind not in KIND_NAMES:
        raise DatasetFormatError(f'unknown dataset kind {kind}')
    offset = _HEADER.size
    if len(data) < offset + 4 * rank + 4:
        raise DatasetFormatError('dataset is truncated (no dims)')
    block = struct.unpack_from(f'<{rank}I', data, offset)
    offset += 4 * rank
    (label_count,) = struct.unpack_from('<I', data, offset)
    offset += 4

    pixel_count = int(np.prod(block))
    record_size = pixel_count + 2 * label_count
    if len(data) - offset != count * record_size:
        raise DatasetFormatError(
            f'dataset declares {count} records of {record_size} bytes, '
            f'payload has {len(data) - offset}'
        )
    if count == 0:
        raise DatasetFormatError('dataset holds no records')
    records = np.frombuffer(data, dtype=np.uint8, offset=offset).reshape(count, record_size)
    pixels = records[:, :pixel_count].reshape(count, *block).copy()
    if pixels.size and pixels.max() > 1:
        raise DatasetFormatError('dataset pixels must be 0 or 1')
    if label_count:
        labels = records[:, pixel_count:].copy().view('<u2').astype(np.uint16)
    else:
        labels = np.zeros((count, 0), dtype=np.uint16)
    return Dataset(kind=kind, pixels=pixels, labels=labels)


def read_dataset(path):
    with open(path, 'rb') as handle:
        return dataset_from_bytes(handle.read())
