"""
Seeded sample generation from the forward model.

Every sample draws from its own generator seeded with
(seed, split, sample index), so results do not depend on how samples are
spread over worker threads, and a validation set built from the same seed
as a training set never reuses a training stream.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from django.conf import settings
from tqdm import tqdm

from flow.exceptions import InvalidPillarError
from flow.forward import NUM_CLASSES, render, validate_sequence
from networks.exceptions import ShapeMismatchError

from .dataset import APN, APNC, ITN, SMC, Dataset

logger = logging.getLogger(__name__)

PADDING_ROWS = 5
SPLITS = {'train': 0, 'valid': 1}

APN_LENGTHS = (0, 9)
ITN_LENGTHS = (2, 10)
SMC_PILLARS = 10


def truncate(sequence):
    """
    Keeps the leading half of a sequence, rounding up for odd lengths.
    """
    if len(sequence) == 0:
        raise InvalidPillarError('cannot truncate an empty sequence')
    return list(sequence[:(len(sequence) + 1) // 2])


def assemble_apn_input(pre, post):
    """
    Stacks pre-shape, zero padding and post-shape vertically.

    Returns:
        np.ndarray: uint8 raster of (2 * height + 5) x width.
    Raises:
        ShapeMismatchError: If the shapes are not equal 2-D rasters.
    """
    pre = np.asarray(pre, dtype=np.uint8)
    post = np.asarray(post, dtype=np.uint8)
    if pre.ndim != 2 or pre.shape != post.shape:
        raise ShapeMismatchError('assemble_apn_input', pre.shape, post.shape)
    padding = np.zeros((PADDING_ROWS, pre.shape[1]), dtype=np.uint8)
    return np.concatenate([pre, padding, post], axis=0)


def sample_rng(seed, split, index):
    if split not in SPLITS:
        raise ValueError(f'split must be one of {sorted(SPLITS)}, got {split!r}')
    return np.random.default_rng([seed, SPLITS[split], index])


def _pillars(rng, size, classes):
    if classes is None:
        return [int(k) for k in rng.integers(1, NUM_CLASSES + 1, size=size)]
    return [int(k) for k in rng.choice(classes, size=size)]


def draw_apn(rng, lengths=APN_LENGTHS, classes=None):
    """
    Returns:
        tuple[list[int], int]: Prefix sequence and the label pillar.
    """
    prefix = _pillars(rng, int(rng.integers(lengths[0], lengths[1] + 1)), classes)
    (label,) = _pillars(rng, 1, classes)
    return prefix, label


def draw_itn(rng, lengths=ITN_LENGTHS, classes=None):
    return _pillars(rng, int(rng.integers(lengths[0], lengths[1] + 1)), classes)


def draw_smc(rng, pillars=SMC_PILLARS, classes=None):
    return _pillars(rng, pillars, classes)


def _check_request(n, lengths, classes):
    if n < 1:
        raise ValueError(f'sample count must be at least 1, got {n}')
    if lengths is not None and not 0 <= lengths[0] <= lengths[1]:
        raise ValueError(f'invalid length range {lengths}')
    if classes is not None:
        if len(classes) == 0:
            raise InvalidPillarError('class subset is empty')
        validate_sequence(list(classes))


def _generate(n, make_sample, description, threads):
    threads = threads or settings.FLOWSCULPT['THREADS']
    progress = settings.FLOWSCULPT['PROGRESS']
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        # map keeps index order, so assembly is independent of scheduling
        samples = list(tqdm(
            executor.map(make_sample, range(n)),
            total=n, desc=description, leave=False, disable=not progress,
        ))
    pixels = np.stack([pixels for pixels, _ in samples])
    labels = np.array([labels for _, labels in samples], dtype=np.uint16)
    return pixels, labels


def gen_apn(n, seed, library, lengths=APN_LENGTHS, split='train', classes=None, threads=None):
    """
    Juxtaposed (pre | padding | post) rasters labelled with the pillar that
    turns pre into post.

    Args:
        n (int): Sample count.
        seed (int): Base seed.
        library (PillarLibrary): Deformation maps.
        lengths (tuple[int, int]): Inclusive prefix length range.
        split (str): 'train' or 'valid'.
        classes (Sequence[int] | None): Restrict draws to these pillars.
        threads (int | None): Worker cap (settings default when None).
    Returns:
        Dataset: Kind APN.
    """
    _check_request(n, lengths, classes)
    logger.info('generating %d apn samples (seed %d, %s split)', n, seed, split)

    def make_sample(index):
        prefix, label = draw_apn(sample_rng(seed, split, index), lengths, classes)
        pre = render(prefix, library)
        post = render(prefix + [label], library)
        return assemble_apn_input(pre, post), [label]

    pixels, labels = _generate(n, make_sample, 'apn', threads)
    return Dataset(kind=APN, pixels=pixels, labels=labels)


def gen_apnc(n, seed, library, lengths=APN_LENGTHS, split='train', classes=None, threads=None):
    """
    Same draws as `gen_apn`, with pre and post kept as two channels.
    """
    _check_request(n, lengths, classes)
    logger.info('generating %d apnc samples (seed %d, %s split)', n, seed, split)

    def make_sample(index):
        prefix, label = draw_apn(sample_rng(seed, split, index), lengths, classes)
        pre = render(prefix, library)
        post = render(prefix + [label], library)
        return np.stack([pre, post]), [label]

    pixels, labels = _generate(n, make_sample, 'apnc', threads)
    return Dataset(kind=APNC, pixels=pixels, labels=labels)


def gen_itn(n, seed, library, lengths=ITN_LENGTHS, split='train', classes=None, threads=None):
    """
    Final shapes paired with the bridging shape of the half-truncated sequence.
    """
    if lengths[0] < 1:
        raise ValueError('itn sequences need at least one pillar')
    _check_request(n, lengths, classes)
    logger.info('generating %d itn samples (seed %d, %s split)', n, seed, split)

    def make_sample(index):
        sequence = draw_itn(sample_rng(seed, split, index), lengths, classes)
        final = render(sequence, library)
        bridge = render(truncate(sequence), library)
        return np.stack([final, bridge]), []

    pixels, labels = _generate(n, make_sample, 'itn', threads)
    return Dataset(kind=ITN, pixels=pixels, labels=labels)


def gen_smc(n, seed, library, pillars=SMC_PILLARS, split='train', classes=None, threads=None):
    """
    Final shapes labelled with their full fixed-length generating sequence.
    """
    if pillars < 1:
        raise ValueError(f'pillars per sequence must be at least 1, got {pillars}')
    _check_request(n, None, classes)
    logger.info('generating %d smc samples with %d pillars (seed %d, %s split)', n, pillars, seed, split)

    def make_sample(index):
        sequence = draw_smc(sample_rng(seed, split, index), pillars, classes)
        return render(sequence, library), sequence

    pixels, labels = _generate(n, make_sample, 'smc', threads)
    return Dataset(kind=SMC, pixels=pixels, labels=labels)


GENERATORS = {'apn': gen_apn, 'apnc': gen_apnc, 'itn': gen_itn, 'smc': gen_smc}
