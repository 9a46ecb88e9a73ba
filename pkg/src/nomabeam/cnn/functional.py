"""
Forward and backward passes of the network layers on (batch, channels, height,
width) arrays. All functions are pure: the backward passes take whatever their
forward pass returned as cache.

Convolution and pooling use a 3 x 3 window, stride 1 and one ring of zero
padding, so they keep the spatial size.
"""
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DegenerateBatchError, ShapeMismatchError

KERNEL = 3
PAD = 1
LEAKY_SLOPE = 0.01


def _check_4d(x: np.ndarray, name: str = "input"):
    if x.ndim != 4:
        raise ShapeMismatchError(f"{name} must be (batch, channels, height, width), got shape {x.shape}")


def _pad(x: np.ndarray) -> np.ndarray:
    return np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))


def _windows(x: np.ndarray) -> np.ndarray:
    """View of shape (batch, channels, height, width, 3, 3) on the padded input."""
    return sliding_window_view(_pad(x), (KERNEL, KERNEL), axis=(2, 3))


def _scatter_windows(window_grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Adjoint of :func:`_windows`: adds every window position back onto the input."""
    _, _, height, width = shape
    padded = np.zeros(shape[:2] + (height + 2 * PAD, width + 2 * PAD))
    for i in range(KERNEL):
        for j in range(KERNEL):
            padded[:, :, i:i + height, j:j + width] += window_grad[..., i, j]
    return padded[:, :, PAD:PAD + height, PAD:PAD + width]


# Convolution

def conv2d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    """Cross-correlation of ``x`` with ``weight`` of shape (out, in, 3, 3)."""
    _check_4d(x)
    if weight.ndim != 4 or weight.shape[1:] != (x.shape[1], KERNEL, KERNEL):
        raise ShapeMismatchError(
            f"kernel of shape {weight.shape} does not fit an input with {x.shape[1]} channels"
        )
    if bias.shape != (weight.shape[0],):
        raise ShapeMismatchError(f"bias of shape {bias.shape} does not fit {weight.shape[0]} kernels")
    windows = _windows(x)
    out = np.einsum('bchwij,ocij->bohw', windows, weight, optimize=True)
    out += bias[np.newaxis, :, np.newaxis, np.newaxis]
    return out, (x, windows)


def conv2d_backward(dout: np.ndarray, cache, weight: np.ndarray):
    """Returns the gradients with respect to input, weight and bias."""
    x, windows = cache
    dweight = np.einsum('bohw,bchwij->ocij', dout, windows, optimize=True)
    dbias = dout.sum(axis=(0, 2, 3))
    dwindows = np.einsum('bohw,ocij->bchwij', dout, weight, optimize=True)
    dx = _scatter_windows(dwindows, x.shape)
    return dx, dweight, dbias


# Batch normalization

def batchnorm_forward(
        x: np.ndarray,
        scale: np.ndarray,
        shift: np.ndarray,
        running_mean: np.ndarray,
        running_var: np.ndarray,
        eps: float,
        momentum: float,
        training: bool):
    """Per-channel normalization.

    In training mode the batch statistics are used and the running statistics are
    updated in place (exponential moving average, unbiased variance). In inference
    mode the running statistics are used.
    """
    _check_4d(x)
    channels = x.shape[1]
    if scale.shape != (channels,) or shift.shape != (channels,):
        raise ShapeMismatchError(f"batch norm parameters do not fit {channels} channels")
    if training:
        if x.shape[0] < 2:
            raise DegenerateBatchError("batch normalization in training mode needs at least 2 samples")
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        count = x.shape[0] * x.shape[2] * x.shape[3]
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var * count / (count - 1)
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean[np.newaxis, :, np.newaxis, np.newaxis]) * inv_std[np.newaxis, :, np.newaxis, np.newaxis]
    out = x_hat * scale[np.newaxis, :, np.newaxis, np.newaxis] + shift[np.newaxis, :, np.newaxis, np.newaxis]
    return out, (x_hat, inv_std, training)


def batchnorm_backward(dout: np.ndarray, cache, scale: np.ndarray):
    """Returns the gradients with respect to input, scale and shift."""
    x_hat, inv_std, training = cache
    dscale = np.sum(dout * x_hat, axis=(0, 2, 3))
    dshift = dout.sum(axis=(0, 2, 3))
    dx_hat = dout * scale[np.newaxis, :, np.newaxis, np.newaxis]
    factor = inv_std[np.newaxis, :, np.newaxis, np.newaxis]
    if not training:
        return dx_hat * factor, dscale, dshift
    count = dout.shape[0] * dout.shape[2] * dout.shape[3]
    dx = factor / count * (
        count * dx_hat
        - dx_hat.sum(axis=(0, 2, 3), keepdims=True)
        - x_hat * np.sum(dx_hat * x_hat, axis=(0, 2, 3), keepdims=True)
    )
    return dx, dscale, dshift


# Activations

def leaky_relu_forward(x: np.ndarray, slope: float = LEAKY_SLOPE):
    return np.where(x >= 0, x, slope * x), x


def leaky_relu_backward(dout: np.ndarray, cache, slope: float = LEAKY_SLOPE):
    return np.where(cache >= 0, dout, slope * dout)


def tanh_forward(x: np.ndarray):
    out = np.tanh(x)
    return out, out


def tanh_backward(dout: np.ndarray, cache):
    return dout * (1.0 - cache ** 2)


# Mean pooling

def _pool_divisor(shape: Tuple[int, ...], include_pad: bool):
    if include_pad:
        return float(KERNEL * KERNEL)
    # Number of non-padded positions under every window
    ones = np.ones((1, 1) + tuple(shape[2:]))
    return _windows(ones).sum(axis=(-2, -1))


def meanpool_forward(x: np.ndarray, include_pad: bool = True):
    """3 x 3 mean pooling. With ``include_pad`` the divisor is always 9, otherwise
    windows at the edges are averaged over their non-padded positions only."""
    _check_4d(x)
    divisor = _pool_divisor(x.shape, include_pad)
    out = _windows(x).sum(axis=(-2, -1)) / divisor
    return out, (x.shape, divisor)


def meanpool_backward(dout: np.ndarray, cache):
    shape, divisor = cache
    share = dout / divisor
    return _scatter_windows(np.broadcast_to(share[..., np.newaxis, np.newaxis], share.shape + (KERNEL, KERNEL)), shape)


# Dense

def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    """Affine map of the flattened input, ``weight`` of shape (inputs, outputs)."""
    flat = x.reshape(x.shape[0], -1)
    if weight.ndim != 2 or flat.shape[1] != weight.shape[0]:
        raise ShapeMismatchError(f"dense weight of shape {weight.shape} does not fit {flat.shape[1]} inputs")
    if bias.shape != (weight.shape[1],):
        raise ShapeMismatchError(f"bias of shape {bias.shape} does not fit {weight.shape[1]} outputs")
    return flat @ weight + bias, (x.shape, flat)


def dense_backward(dout: np.ndarray, cache, weight: np.ndarray):
    shape, flat = cache
    dx = (dout @ weight.T).reshape(shape)
    return dx, flat.T @ dout, dout.sum(axis=0)


# Loss

def rmse_loss(pred: np.ndarray, label: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean over the batch of the per-sample RMSE, and its gradient with respect to
    ``pred``. One-dimensional inputs are a batch of one."""
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    label = np.atleast_2d(np.asarray(label, dtype=np.float64))
    if pred.shape != label.shape:
        raise ShapeMismatchError(f"prediction of shape {pred.shape} and label of shape {label.shape} differ")
    if pred.size == 0:
        raise ShapeMismatchError("RMSE of an empty input")
    batch, length = pred.shape
    error = pred - label
    per_sample = np.sqrt(np.mean(error ** 2, axis=1))
    # The gradient at error = 0 is taken as 0
    safe = np.where(per_sample > 0, per_sample, 1.0)
    grad = np.where(per_sample[:, np.newaxis] > 0, error / (length * safe[:, np.newaxis]), 0.0) / batch
    return float(per_sample.mean()), grad


__all__ = [
    'conv2d_forward',
    'conv2d_backward',
    'batchnorm_forward',
    'batchnorm_backward',
    'leaky_relu_forward',
    'leaky_relu_backward',
    'tanh_forward',
    'tanh_backward',
    'meanpool_forward',
    'meanpool_backward',
    'dense_forward',
    'dense_backward',
    'rmse_loss',
]
