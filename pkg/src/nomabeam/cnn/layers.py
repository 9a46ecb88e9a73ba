"""
Stateful layers wrapping :mod:`nomabeam.cnn.functional`. Every layer keeps the
cache of its last forward pass, its parameters and, after a backward pass, the
gradients of these parameters.
"""
from typing import Dict, Optional, Tuple

import numpy as np

from ..errors import ShapeMismatchError
from . import functional as F

Shape = Tuple[int, int, int]


def he_std(fan_in: int, slope: float = F.LEAKY_SLOPE) -> float:
    """He/Kaiming normal standard deviation for a leaky-ReLU network."""
    return float(np.sqrt(2.0 / ((1.0 + slope ** 2) * fan_in)))


class Layer:
    """Base class of all layers.

    ``params`` maps names onto trainable arrays, ``grads`` holds the matching
    gradients after :meth:`backward`. ``buffers`` are non-trainable state arrays
    (running statistics) which are saved with the model.
    """
    kind: str = "layer"

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.buffers: Dict[str, np.ndarray] = {}
        self.training = True
        self._cache = None

    def output_shape(self, shape: Shape) -> Shape:
        return shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def state(self) -> Dict[str, np.ndarray]:
        """Parameters followed by buffers, in a fixed order."""
        return {**self.params, **self.buffers}

    def config(self) -> Dict:
        return {}

    def _cached(self):
        if self._cache is None:
            raise RuntimeError(f"{self.kind}: backward called before forward")
        return self._cache

    def __repr__(self):
        options = ', '.join(f"{key}={value}" for key, value in self.config().items())
        return f"{type(self).__name__}({options})"


class Conv2D(Layer):
    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        shape = (out_channels, in_channels, F.KERNEL, F.KERNEL)
        if rng is None:
            weight = np.zeros(shape)
        else:
            weight = rng.standard_normal(shape) * he_std(in_channels * F.KERNEL * F.KERNEL)
        self.params = {'weight': weight, 'bias': np.zeros(out_channels)}

    def output_shape(self, shape: Shape) -> Shape:
        if shape[0] != self.in_channels:
            raise ShapeMismatchError(f"conv2d expects {self.in_channels} input channels, got shape {shape}")
        return (self.out_channels,) + tuple(shape[1:])

    def forward(self, x):
        out, self._cache = F.conv2d_forward(x, self.params['weight'], self.params['bias'])
        return out

    def backward(self, dout):
        dx, self.grads['weight'], self.grads['bias'] = F.conv2d_backward(dout, self._cached(), self.params['weight'])
        return dx

    def config(self):
        return {'in_channels': self.in_channels, 'out_channels': self.out_channels}


class BatchNorm2D(Layer):
    kind = "batchnorm"

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        if not eps > 0:
            raise ValueError("batch norm epsilon must be positive")
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.params = {'scale': np.ones(channels), 'shift': np.zeros(channels)}
        self.buffers = {'running_mean': np.zeros(channels), 'running_var': np.ones(channels)}

    def output_shape(self, shape: Shape) -> Shape:
        if shape[0] != self.channels:
            raise ShapeMismatchError(f"batch norm expects {self.channels} channels, got shape {shape}")
        return shape

    def forward(self, x):
        out, self._cache = F.batchnorm_forward(
            x,
            self.params['scale'],
            self.params['shift'],
            self.buffers['running_mean'],
            self.buffers['running_var'],
            self.eps,
            self.momentum,
            self.training
        )
        return out

    def backward(self, dout):
        dx, self.grads['scale'], self.grads['shift'] = F.batchnorm_backward(dout, self._cached(), self.params['scale'])
        return dx

    def config(self):
        return {'channels': self.channels, 'eps': self.eps, 'momentum': self.momentum}


class LeakyReLU(Layer):
    kind = "leaky_relu"

    def __init__(self, slope: float = F.LEAKY_SLOPE):
        super().__init__()
        self.slope = slope

    def forward(self, x):
        out, self._cache = F.leaky_relu_forward(x, self.slope)
        return out

    def backward(self, dout):
        return F.leaky_relu_backward(dout, self._cached(), self.slope)

    def config(self):
        return {'slope': self.slope}


class MeanPool2D(Layer):
    kind = "meanpool"

    def __init__(self, include_pad: bool = True):
        super().__init__()
        self.include_pad = include_pad

    def forward(self, x):
        out, self._cache = F.meanpool_forward(x, self.include_pad)
        return out

    def backward(self, dout):
        return F.meanpool_backward(dout, self._cached())

    def config(self):
        return {'include_pad': self.include_pad}


class Dense(Layer):
    kind = "dense"

    def __init__(self, inputs: int, outputs: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.inputs = inputs
        self.outputs = outputs
        if rng is None:
            weight = np.zeros((inputs, outputs))
        else:
            weight = rng.standard_normal((inputs, outputs)) * he_std(inputs)
        self.params = {'weight': weight, 'bias': np.zeros(outputs)}

    def output_shape(self, shape: Shape) -> Shape:
        if int(np.prod(shape)) != self.inputs:
            raise ShapeMismatchError(f"dense layer expects {self.inputs} inputs, got shape {shape}")
        # Flat vectors are carried as (outputs, 1, 1)
        return (self.outputs, 1, 1)

    def forward(self, x):
        out, self._cache = F.dense_forward(x, self.params['weight'], self.params['bias'])
        return out

    def backward(self, dout):
        dx, self.grads['weight'], self.grads['bias'] = F.dense_backward(dout, self._cached(), self.params['weight'])
        return dx

    def config(self):
        return {'inputs': self.inputs, 'outputs': self.outputs}


class Tanh(Layer):
    kind = "tanh"

    def forward(self, x):
        out, self._cache = F.tanh_forward(x)
        return out

    def backward(self, dout):
        return F.tanh_backward(dout, self._cached())


LAYER_TYPES = {
    layer_type.kind: layer_type
    for layer_type in (Conv2D, BatchNorm2D, LeakyReLU, MeanPool2D, Dense, Tanh)
}


__all__ = [
    'Layer',
    'Conv2D',
    'BatchNorm2D',
    'LeakyReLU',
    'MeanPool2D',
    'Dense',
    'Tanh',
    'LAYER_TYPES',
    'he_std',
]
