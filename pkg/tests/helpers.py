"""Utilities shared by the test modules."""
import numpy as np

from nomabeam.channel import ChannelSet, RngStream, sample_rayleigh


def random_channels(count, n, k, sigma2=0.1, seed=11):
    return [sample_rayleigh(n, k, sigma2, RngStream(seed, index)) for index in range(count)]


def numerical_gradient(f, x, step=1e-6):
    """Central finite differences of the scalar function ``f`` at ``x`` (modified in
    place and restored)."""
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        original = x[index]
        x[index] = original + step
        upper = f()
        x[index] = original - step
        lower = f()
        x[index] = original
        grad[index] = (upper - lower) / (2 * step)
    return grad


def relative_error(analytic, numeric):
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def two_user_channel():
    """N=1, K=2 channel with |h_1|^2 = 1 and |h_2|^2 = 4."""
    return ChannelSet(h=np.array([[1.0, 2.0j]]), sigma2=0.1)
