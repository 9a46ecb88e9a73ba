"""
Real-valued encodings of the complex channel (network input) and of the beam
directions (network target).

TCNN stacks the in-phase and quadrature parts of all users in two rows::

    [[Re(h_1)^T, ..., Re(h_K)^T],
     [Im(h_1)^T, ..., Im(h_K)^T]]                     (2 x NK)

FCNN uses the real embedding of the complex matrix::

    [[Re(H), -Im(H)],
     [Im(H),  Re(H)]]                                 (2N x 2K)

The label of a direction matrix is ``[Re(u_1); Im(u_1); ...; Re(u_K); Im(u_K)]``.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

from ..channel import ChannelSet
from ..errors import ShapeMismatchError
from ..precoding import DirectionMatrix

# Decoded label columns below this norm have no direction
MIN_COLUMN_NORM = 1e-12


class Encoding(str, Enum):
    TCNN = "tcnn"
    FCNN = "fcnn"


@dataclass(frozen=True, eq=False)
class Tensor3:
    """Single network input of shape (channels, height, width)."""
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ShapeMismatchError(f"expected a (channels, height, width) tensor, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor entries must be finite")
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def plane(self) -> np.ndarray:
        """The first (and for encoded channels only) channel."""
        return self.data[0]


def input_shape(encoding: Encoding, n: int, k: int) -> Tuple[int, int, int]:
    if Encoding(encoding) == Encoding.TCNN:
        return (1, 2, n * k)
    return (1, 2 * n, 2 * k)


def tcnn_encode(c: ChannelSet) -> Tensor3:
    # Column-major flatten concatenates the users
    flat = c.h.reshape(-1, order='F')
    return Tensor3(np.stack([flat.real, flat.imag])[np.newaxis])


def fcnn_encode(c: ChannelSet) -> Tensor3:
    re, im = c.h.real, c.h.imag
    return Tensor3(np.block([[re, -im], [im, re]])[np.newaxis])


def tcnn_decode(t: Tensor3, n: int, k: int) -> np.ndarray:
    """Channel matrix of a TCNN tensor."""
    if (t.channels, t.height, t.width) != input_shape(Encoding.TCNN, n, k):
        raise ShapeMismatchError(f"tensor of shape {t.data.shape} is no TCNN encoding for n={n}, k={k}")
    flat = t.plane[0] + 1j * t.plane[1]
    return flat.reshape((n, k), order='F')


def fcnn_decode(t: Tensor3, n: int, k: int) -> np.ndarray:
    """Channel matrix of an FCNN tensor, read from its left block column."""
    if (t.channels, t.height, t.width) != input_shape(Encoding.FCNN, n, k):
        raise ShapeMismatchError(f"tensor of shape {t.data.shape} is no FCNN encoding for n={n}, k={k}")
    return t.plane[:n, :k] + 1j * t.plane[n:, :k]


def encode(encoding: Encoding, c: ChannelSet) -> Tensor3:
    if Encoding(encoding) == Encoding.TCNN:
        return tcnn_encode(c)
    return fcnn_encode(c)


def encode_batch(encoding: Encoding, channels: Sequence[ChannelSet]) -> np.ndarray:
    """Stacks the encodings of several channels into a (batch, 1, height, width) array."""
    return np.stack([encode(encoding, c).data for c in channels])


def label_encode(u: DirectionMatrix) -> np.ndarray:
    if not isinstance(u, DirectionMatrix):
        u = DirectionMatrix(u)
    # Per user: N real parts followed by N imaginary parts
    return np.stack([u.u.real.T, u.u.imag.T], axis=1).reshape(-1)


def label_decode(v: np.ndarray, n: int, k: int) -> DirectionMatrix:
    """Directions of a label vector; every column is rescaled to unit norm."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != 2 * n * k:
        raise ShapeMismatchError(f"label of length {v.size} does not match n={n}, k={k}")
    blocks = v.reshape(k, 2, n)
    w = (blocks[:, 0, :] + 1j * blocks[:, 1, :]).T
    return DirectionMatrix.normalized(w, min_norm=MIN_COLUMN_NORM)


__all__ = [
    'Encoding',
    'Tensor3',
    'input_shape',
    'tcnn_encode',
    'fcnn_encode',
    'tcnn_decode',
    'fcnn_decode',
    'encode',
    'encode_batch',
    'label_encode',
    'label_decode',
    'MIN_COLUMN_NORM',
]
