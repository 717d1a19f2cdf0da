"""
Layered network with a loss, forward/backward passes and plain SGD.
"""
import logging

import numpy as np

from .exceptions import LabelRangeError, ShapeMismatchError
from .layers import backward_stack, build_stack, forward_stack

logger = logging.getLogger(__name__)

_TINY = np.finfo(np.float64).tiny


class NLL:
    """
    Mean negative log-likelihood of 1-based class labels.
    """
    code = 1
    heads = 1

    def _split(self, outputs, labels):
        labels = np.asarray(labels).reshape(len(outputs), self.heads)
        probs = outputs.reshape(len(outputs), self.heads, -1)
        classes = probs.shape[-1]
        if labels.size and (labels.min() < 1 or labels.max() > classes):
            raise LabelRangeError(f'labels must lie in 1..{classes}')
        return probs, labels.astype(np.int64) - 1

    def value(self, outputs, labels):
        probs, picks = self._split(outputs, labels)
        chosen = np.take_along_axis(probs, picks[..., None], axis=-1)[..., 0]
        return float(-np.log(np.maximum(chosen, _TINY)).sum(axis=1).mean())

    def gradient(self, outputs, labels):
        probs, picks = self._split(outputs, labels)
        grad = np.zeros_like(probs)
        chosen = np.take_along_axis(probs, picks[..., None], axis=-1)
        np.put_along_axis(grad, picks[..., None], -1.0 / (len(outputs) * np.maximum(chosen, _TINY)), axis=-1)
        return grad.reshape(outputs.shape)

    def accuracy(self, outputs, labels):
        probs, picks = self._split(outputs, labels)
        return float((probs.argmax(axis=-1) == picks).mean())


class SummedNLL(NLL):
    """
    Sum over `heads` independent softmax heads of the per-head NLL.
    """
    code = 3

    def __init__(self, heads):
        self.heads = heads


class MSE:
    """
    Batch mean of half the summed squared error per sample.
    """
    code = 2
    heads = 0

    def value(self, outputs, targets):
        diff = outputs - np.asarray(targets, dtype=np.float64).reshape(outputs.shape)
        return float(0.5 * (diff * diff).reshape(len(outputs), -1).sum(axis=1).mean())

    def gradient(self, outputs, targets):
        diff = outputs - np.asarray(targets, dtype=np.float64).reshape(outputs.shape)
        return diff / len(outputs)

    def accuracy(self, outputs, targets):
        return None


def loss_from_code(code, heads=1):
    if code == NLL.code:
        return NLL()
    if code == MSE.code:
        return MSE()
    if code == SummedNLL.code:
        return SummedNLL(heads)
    raise ValueError(f'unknown loss code {code}')


class Network:
    """
    Ordered layers plus a loss.

    Attributes:
        input_shape (tuple): Shape of one sample.
        layers (list[Layer]): Built layers.
        loss (NLL | SummedNLL | MSE): Training objective.
        tag (str): Architecture tag stored in checkpoints.
    """

    def __init__(self, input_shape, layers, loss, seed=0, tag=''):
        self.input_shape = tuple(input_shape)
        self.layers = list(layers)
        self.loss = loss
        self.tag = tag
        self.output_shape = build_stack(self.layers, self.input_shape, np.random.default_rng(seed))

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def parameter_count(self):
        return sum(p.size for p in self.parameters())

    def describe(self):
        """
        Returns:
            list[tuple[str, tuple]]: Layer names with their output shapes.
        """
        return [(layer.name, layer.output_shape) for layer in self.layers]

    def forward(self, batch):
        """
        Runs the batch through every layer.

        Returns:
            tuple: Output array and the per-layer caches for `backward`.
        Raises:
            ShapeMismatchError: Naming the first layer that rejects its input.
        """
        batch = np.asarray(batch, dtype=np.float64)
        if batch.shape[1:] != self.input_shape:
            raise ShapeMismatchError('input', self.input_shape, batch.shape[1:])
        return forward_stack(self.layers, batch)

    def predict(self, batch, chunk=500):
        batch = np.asarray(batch, dtype=np.float64)
        outputs = [self.forward(batch[start:start + chunk])[0] for start in range(0, len(batch), chunk)]
        if not outputs:
            return np.zeros((0, *self.output_shape))
        return np.concatenate(outputs, axis=0)

    def loss_value(self, outputs, targets):
        return self.loss.value(outputs, targets)

    def backward(self, caches, outputs, targets):
        """
        Back-propagates the loss gradient.

        Returns:
            list[np.ndarray]: One gradient per parameter, same shapes.
        """
        grad = self.loss.gradient(outputs, targets)
        _, grads = backward_stack(self.layers, grad, caches)
        return grads

    def gradients(self, batch, targets):
        outputs, caches = self.forward(batch)
        return self.loss_value(outputs, targets), self.backward(caches, outputs, targets)

    def sgd_step(self, gradients, learning_rate):
        """
        In place: theta <- theta - learning_rate * gradient.
        """
        for param, grad in zip(self.parameters(), gradients):
            if param.shape != grad.shape:
                raise ShapeMismatchError('sgd_step', param.shape, grad.shape)
            param -= learning_rate * grad
        return self

    def copy_parameters(self):
        return [p.copy() for p in self.parameters()]

    def load_parameters(self, arrays):
        params = self.parameters()
        if len(arrays) != len(params):
            raise ShapeMismatchError('parameters', (len(params),), (len(arrays),))
        for param, array in zip(params, arrays):
            if param.shape != array.shape:
                raise ShapeMismatchError('parameters', param.shape, array.shape)
            param[...] = array
