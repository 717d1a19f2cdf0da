"""
Trained-model wrappers and their prediction entry points.

Argmax ties resolve to the lowest pillar index (numpy's argmax keeps the
first maximum).
"""
import logging

import numpy as np

from datagen.generation import assemble_apn_input
from networks.checkpoint import load
from networks.exceptions import ShapeMismatchError

from .builders import (
    APN_INPUT,
    APN_TAG,
    APNC_INPUT,
    APNC_TAG,
    CLASSES,
    ITN_TAG,
    SHAPE_INPUT,
    build_apn,
    build_apnc,
    build_itn,
    build_smc,
)
from .exceptions import ArchitectureMismatchError

logger = logging.getLogger(__name__)

SHAPE = SHAPE_INPUT[1:]


def _check_shape(operation, shape):
    shape = np.asarray(shape)
    if shape.shape != SHAPE:
        raise ShapeMismatchError(operation, SHAPE, shape.shape)
    return shape.astype(np.float64)


class _Model:
    tag = None
    input_shape = None
    output_shape = None

    def __init__(self, network):
        if not self._accepts_tag(network.tag):
            raise ArchitectureMismatchError(
                f'{type(self).__name__} needs a {self.tag} network, got tag {network.tag!r}'
            )
        if network.input_shape != self.input_shape or network.output_shape != self.expected_output(network):
            raise ArchitectureMismatchError(
                f'{network.tag} network maps {network.input_shape} -> {network.output_shape}, '
                f'expected {self.input_shape} -> {self.expected_output(network)}'
            )
        self.network = network

    def _accepts_tag(self, tag):
        return tag == self.tag

    def expected_output(self, network):
        return self.output_shape


class ApnModel(_Model):
    """
    Classifier over one juxtaposed (current | padding | target) raster.
    """
    tag = APN_TAG
    input_shape = APN_INPUT
    output_shape = (CLASSES,)

    @classmethod
    def build(cls, seed=0):
        return cls(build_apn(seed))

    def encode(self, current, target):
        return assemble_apn_input(current, target)[None, None].astype(np.float64)


class ApnCModel(_Model):
    """
    Classifier with current and target shapes in separate channels.
    """
    tag = APNC_TAG
    input_shape = APNC_INPUT
    output_shape = (CLASSES,)

    @classmethod
    def build(cls, seed=0):
        return cls(build_apnc(seed))

    def encode(self, current, target):
        return np.stack([current, target])[None].astype(np.float64)


class ItnModel(_Model):
    """
    Autoencoder predicting the bridging shape of a target.

    Attributes:
        threshold (float): Sigmoid outputs at or above it become fluid.
    """
    tag = ITN_TAG
    input_shape = SHAPE_INPUT
    output_shape = (SHAPE[0] * SHAPE[1],)

    def __init__(self, network, threshold=0.5):
        super().__init__(network)
        if not 0.0 <= threshold <= 1.0:
            raise ValueError(f'threshold must lie in [0, 1], got {threshold}')
        self.threshold = threshold

    @classmethod
    def build(cls, seed=0, threshold=0.5):
        return cls(build_itn(seed), threshold)


class SmcModel(_Model):
    """
    Fixed-length sequence classifier with one 32-way head per pillar.
    """
    tag = 'SMC'
    input_shape = SHAPE_INPUT

    def _accepts_tag(self, tag):
        return tag.startswith(self.tag) and tag[len(self.tag):].isdigit()

    def expected_output(self, network):
        return (network.loss.heads * CLASSES,)

    @property
    def heads(self):
        return self.network.loss.heads

    @classmethod
    def build(cls, seed=0, heads=10):
        return cls(build_smc(seed, heads))


def predict_pillar(model, current, target):
    """
    Predicts the pillar that turns `current` into `target`.

    Args:
        model (ApnModel | ApnCModel): Trained classifier.
        current (np.ndarray): Current 12x100 shape.
        target (np.ndarray): Stage target 12x100 shape.
    Returns:
        tuple[int, np.ndarray]: Pillar index in 1..32 and the posterior over 32 classes.
    """
    current = _check_shape('predict_pillar', current)
    target = _check_shape('predict_pillar', target)
    out, _ = model.network.forward(model.encode(current, target))
    posterior = out[0]
    return int(np.argmax(posterior)) + 1, posterior


def predict_bridge(model, target):
    """
    Thresholded bridging shape for a final target.
    """
    target = _check_shape('predict_bridge', target)
    out, _ = model.network.forward(target[None, None])
    # saturated sigmoids are kept strictly inside (0, 1)
    out = np.clip(out[0], np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return (out >= model.threshold).astype(np.uint8).reshape(SHAPE)


def predict_sequence_smc(model, target):
    """
    Per-head argmax, heads in pillar order.
    """
    target = _check_shape('predict_sequence_smc', target)
    out, _ = model.network.forward(target[None, None])
    return [int(k) + 1 for k in out[0].reshape(model.heads, CLASSES).argmax(axis=1)]


MODEL_TYPES = {'apn': ApnModel, 'apnc': ApnCModel, 'itn': ItnModel, 'smc': SmcModel}


def from_checkpoint(checkpoint, expected=None):
    """
    Wraps a checkpoint's network in the model type its tag names.

    Args:
        checkpoint (Checkpoint): Loaded checkpoint.
        expected (type | None): Model type the caller needs.
    Raises:
        ArchitectureMismatchError: On an unknown tag or a different type than expected.
    """
    tag = checkpoint.tag
    if tag == APN_TAG:
        model = ApnModel(checkpoint.network)
    elif tag == APNC_TAG:
        model = ApnCModel(checkpoint.network)
    elif tag == ITN_TAG:
        model = ItnModel(checkpoint.network)
    elif tag.startswith(SmcModel.tag):
        model = SmcModel(checkpoint.network)
    else:
        raise ArchitectureMismatchError(f'unknown architecture tag {tag!r}')
    if expected is not None and not isinstance(model, expected):
        raise ArchitectureMismatchError(f'expected a {expected.tag} checkpoint, got {tag}')
    return model


def load_model(path, expected=None):
    with open(path, 'rb') as handle:
        checkpoint = load(handle.read())
    logger.info('loaded %s checkpoint from %s (%d epochs)', checkpoint.tag, path, checkpoint.epochs)
    return from_checkpoint(checkpoint, expected)
