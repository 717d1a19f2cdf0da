"""
Layer kinds of the network core.

Every layer works on batch-first float64 arrays and is functional at run
time: `forward` returns the output together with whatever `backward` needs,
so an immutable network can serve concurrent callers. Shapes passed to
`build` exclude the batch axis.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .exceptions import ShapeMismatchError

CONV2D, MAXPOOL, DENSE, ACTIVATION, SOFTMAX, FLATTEN, TOWERS = range(1, 8)

ACTIVATIONS = ('sigmoid', 'tanh', 'relu')


class Layer:
    kind = None

    def __init__(self):
        self.input_shape = None
        self.output_shape = None

    @property
    def name(self):
        return type(self).__name__

    def build(self, input_shape, rng, gain=1.0):
        """
        Fixes the input shape, derives the output shape and draws parameters.

        Returns:
            tuple: Output shape (batch axis excluded).
        """
        self.input_shape = tuple(int(extent) for extent in input_shape)
        self.output_shape = self.infer_shape(self.input_shape)
        self.init_params(rng, gain)
        return self.output_shape

    def infer_shape(self, input_shape):
        return input_shape

    def init_params(self, rng, gain):
        pass

    def parameters(self):
        return []

    def config(self):
        """
        Integers that, with the input shape, rebuild this layer.
        """
        return ()

    def check_input(self, x):
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatchError(self.name, self.input_shape, x.shape[1:])

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad, cache):
        """
        Returns:
            tuple: (gradient w.r.t. the input, list of parameter gradients
            in `parameters()` order).
        """
        raise NotImplementedError


def glorot_uniform(rng, shape, fan_in, fan_out, gain):
    limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Conv2dValid(Layer):
    """
    Valid (no padding) 2-D correlation with `kernels` filters of kh x kw.
    """
    kind = CONV2D

    def __init__(self, kernels, kh, kw):
        super().__init__()
        self.kernels = kernels
        self.kh = kh
        self.kw = kw
        self.W = None
        self.b = None

    @property
    def name(self):
        return f'Conv2dValid({self.kernels},{self.kh},{self.kw})'

    def infer_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[1] < self.kh or input_shape[2] < self.kw:
            raise ShapeMismatchError(self.name, ('C', f'>={self.kh}', f'>={self.kw}'), input_shape)
        channels, height, width = input_shape
        return (self.kernels, height - self.kh + 1, width - self.kw + 1)

    def init_params(self, rng, gain):
        channels = self.input_shape[0]
        area = self.kh * self.kw
        self.W = glorot_uniform(
            rng, (self.kernels, channels, self.kh, self.kw),
            channels * area, self.kernels * area, gain,
        )
        self.b = np.zeros(self.kernels)

    def parameters(self):
        return [self.W, self.b]

    def config(self):
        return (self.kernels, self.kh, self.kw)

    def forward(self, x):
        self.check_input(x)
        windows = sliding_window_view(x, (self.kh, self.kw), axis=(2, 3))
        out = np.tensordot(windows, self.W, axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2) + self.b[None, :, None, None]
        return np.ascontiguousarray(out), x

    def backward(self, grad, cache):
        x = cache
        windows = sliding_window_view(x, (self.kh, self.kw), axis=(2, 3))
        dW = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
        db = grad.sum(axis=(0, 2, 3))
        padded = np.pad(
            grad,
            ((0, 0), (0, 0), (self.kh - 1, self.kh - 1), (self.kw - 1, self.kw - 1)),
        )
        padded_windows = sliding_window_view(padded, (self.kh, self.kw), axis=(2, 3))
        flipped = self.W[:, :, ::-1, ::-1]
        dx = np.tensordot(padded_windows, flipped, axes=([1, 4, 5], [0, 2, 3]))
        return np.ascontiguousarray(dx.transpose(0, 3, 1, 2)), [dW, db]


class MaxPool2x2(Layer):
    """
    Non-overlapping 2x2 max pooling; odd extents are floored.
    """
    kind = MAXPOOL

    def infer_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[1] < 2 or input_shape[2] < 2:
            raise ShapeMismatchError(self.name, ('C', '>=2', '>=2'), input_shape)
        channels, height, width = input_shape
        return (channels, height // 2, width // 2)

    def _blocks(self, x):
        n, c, height, width = x.shape
        ho, wo = height // 2, width // 2
        crop = x[:, :, :2 * ho, :2 * wo]
        return crop.reshape(n, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, 4)

    def forward(self, x):
        self.check_input(x)
        blocks = self._blocks(x)
        # argmax keeps the first maximum, which is where the gradient goes
        winners = blocks.argmax(axis=-1)
        out = np.take_along_axis(blocks, winners[..., None], axis=-1)[..., 0]
        return out, (x.shape, winners)

    def backward(self, grad, cache):
        shape, winners = cache
        n, c, ho, wo = winners.shape
        routed = np.zeros((n, c, ho, wo, 4))
        np.put_along_axis(routed, winners[..., None], grad[..., None], axis=-1)
        routed = routed.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        dx = np.zeros(shape)
        dx[:, :, :2 * ho, :2 * wo] = routed.reshape(n, c, 2 * ho, 2 * wo)
        return dx, []


class Dense(Layer):
    kind = DENSE

    def __init__(self, units):
        super().__init__()
        self.units = units
        self.W = None
        self.b = None

    @property
    def name(self):
        return f'Dense({self.units})'

    def infer_shape(self, input_shape):
        if len(input_shape) != 1:
            raise ShapeMismatchError(self.name, ('features',), input_shape)
        return (self.units,)

    def init_params(self, rng, gain):
        fan_in = self.input_shape[0]
        self.W = glorot_uniform(rng, (fan_in, self.units), fan_in, self.units, gain)
        self.b = np.zeros(self.units)

    def parameters(self):
        return [self.W, self.b]

    def config(self):
        return (self.units,)

    def forward(self, x):
        self.check_input(x)
        return x @ self.W + self.b, x

    def backward(self, grad, cache):
        x = cache
        return grad @ self.W.T, [x.T @ grad, grad.sum(axis=0)]


class Activation(Layer):
    kind = ACTIVATION

    def __init__(self, function):
        super().__init__()
        if function not in ACTIVATIONS:
            raise ValueError(f'unknown activation {function!r}')
        self.function = function

    @property
    def name(self):
        return f'Activation({self.function})'

    def config(self):
        return (ACTIVATIONS.index(self.function),)

    def forward(self, x):
        self.check_input(x)
        if self.function == 'sigmoid':
            out = expit(x)
            return out, out
        if self.function == 'tanh':
            out = np.tanh(x)
            return out, out
        return np.maximum(x, 0.0), x

    def backward(self, grad, cache):
        if self.function == 'sigmoid':
            return grad * cache * (1.0 - cache), []
        if self.function == 'tanh':
            return grad * (1.0 - cache * cache), []
        return grad * (cache > 0), []


class Softmax(Layer):
    """
    Softmax over `groups` equal slices of the feature axis (one per head).
    """
    kind = SOFTMAX

    def __init__(self, groups=1):
        super().__init__()
        self.groups = groups

    @property
    def name(self):
        return f'Softmax({self.groups})' if self.groups > 1 else 'Softmax'

    def infer_shape(self, input_shape):
        if len(input_shape) != 1 or input_shape[0] % self.groups:
            raise ShapeMismatchError(self.name, (f'multiple of {self.groups}',), input_shape)
        return input_shape

    def config(self):
        return (self.groups,)

    def forward(self, x):
        self.check_input(x)
        z = x.reshape(len(x), self.groups, -1)
        z = np.exp(z - z.max(axis=-1, keepdims=True))
        out = z / z.sum(axis=-1, keepdims=True)
        out = out.reshape(x.shape)
        return out, out

    def backward(self, grad, cache):
        s = cache.reshape(len(cache), self.groups, -1)
        g = grad.reshape(s.shape)
        dx = s * (g - (g * s).sum(axis=-1, keepdims=True))
        return dx.reshape(grad.shape), []


class Flatten(Layer):
    kind = FLATTEN

    def infer_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x):
        self.check_input(x)
        return x.reshape(len(x), -1), x.shape

    def backward(self, grad, cache):
        return grad.reshape(cache), []


class ConcatTowers(Layer):
    """
    Parallel towers over equal channel groups, outputs concatenated.

    Each tower owns its parameters and must end in a flat output.
    """
    kind = TOWERS

    def __init__(self, towers):
        super().__init__()
        self.towers = [list(tower) for tower in towers]

    @property
    def name(self):
        return f'ConcatTowers({len(self.towers)})'

    def config(self):
        return (len(self.towers),)

    def build(self, input_shape, rng, gain=1.0):
        self.input_shape = tuple(int(extent) for extent in input_shape)
        channels = self.input_shape[0]
        if len(self.input_shape) != 3 or channels % len(self.towers):
            raise ShapeMismatchError(self.name, (f'channels divisible by {len(self.towers)}',), input_shape)
        tower_shape = (channels // len(self.towers), *self.input_shape[1:])
        widths = []
        for tower in self.towers:
            shape = build_stack(tower, tower_shape, rng)
            if len(shape) != 1:
                raise ShapeMismatchError(f'{self.name} tower', ('features',), shape)
            widths.append(shape[0])
        self.widths = widths
        self.output_shape = (sum(widths),)
        return self.output_shape

    def parameters(self):
        return [p for tower in self.towers for layer in tower for p in layer.parameters()]

    def forward(self, x):
        self.check_input(x)
        step = x.shape[1] // len(self.towers)
        outputs, caches = [], []
        for t, tower in enumerate(self.towers):
            out, tower_caches = forward_stack(tower, x[:, t * step:(t + 1) * step])
            outputs.append(out)
            caches.append(tower_caches)
        return np.concatenate(outputs, axis=1), (x.shape, caches)

    def backward(self, grad, cache):
        shape, caches = cache
        step = shape[1] // len(self.towers)
        dx = np.zeros(shape)
        grads = []
        start = 0
        for t, (tower, tower_caches) in enumerate(zip(self.towers, caches)):
            piece = grad[:, start:start + self.widths[t]]
            start += self.widths[t]
            d_tower, tower_grads = backward_stack(tower, piece, tower_caches)
            dx[:, t * step:(t + 1) * step] = d_tower
            grads.extend(tower_grads)
        return dx, grads


def build_stack(layers, input_shape, rng):
    """
    Builds layers in order; a layer feeding a sigmoid gets the x4 Glorot gain.
    """
    shape = tuple(input_shape)
    for i, layer in enumerate(layers):
        following = layers[i + 1] if i + 1 < len(layers) else None
        gain = 4.0 if isinstance(following, Activation) and following.function == 'sigmoid' else 1.0
        shape = layer.build(shape, rng, gain)
    return shape


def forward_stack(layers, x):
    caches = []
    for layer in layers:
        x, cache = layer.forward(x)
        caches.append(cache)
    return x, caches


def backward_stack(layers, grad, caches):
    grads = []
    for layer, cache in zip(reversed(layers), reversed(caches)):
        grad, layer_grads = layer.backward(grad, cache)
        grads[:0] = layer_grads
    return grad, grads


def layer_from_config(kind, config, towers=None):
    if kind == CONV2D:
        return Conv2dValid(*config)
    if kind == MAXPOOL:
        return MaxPool2x2()
    if kind == DENSE:
        return Dense(*config)
    if kind == ACTIVATION:
        return Activation(ACTIVATIONS[config[0]])
    if kind == SOFTMAX:
        return Softmax(*config)
    if kind == FLATTEN:
        return Flatten()
    if kind == TOWERS:
        return ConcatTowers(towers)
    raise ValueError(f'unknown layer kind {kind}')
