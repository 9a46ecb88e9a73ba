"""
The beamforming network and its model file.

Architecture: four blocks of (3 x 3 convolution with 64 kernels, batch norm,
leaky ReLU), a 3 x 3 mean pooling layer, a dense layer onto the 2NK label entries
and a tanh head. For N=4, K=3 the FCNN chain reads 8x6x1 -> 8x6x64 -> 3072 -> 24
and the TCNN chain 2x12x1 -> 2x12x64 -> 1536 -> 24.
"""
import binascii
import json
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from packaging.version import Version
from pydantic import BaseModel, Field, ValidationError

from ..channel import ChannelSet
from ..errors import DatasetFormatError, FormatVersionError, ShapeMismatchError
from ..precoding import DirectionMatrix
from .encoding import Encoding, encode_batch, input_shape, label_decode
from .layers import LAYER_TYPES, BatchNorm2D, Conv2D, Dense, Layer, LeakyReLU, MeanPool2D, Tanh

logger = logging.getLogger(__name__)

BLOCKS = 4
FILTERS = 64


class TrainingMetadata(BaseModel):
    """How a model was trained. Wall-clock times are not stored so retraining with
    the same seeds reproduces the model file byte by byte."""
    init_seed: Optional[int] = Field(None, description="Seed of the weight initialization.")
    shuffle_seed: Optional[int] = Field(None, description="Seed of the validation split and of the epoch shuffles.")
    config: Dict[str, Any] = Field({}, description="Training configuration.")
    samples: int = Field(0, description="Number of samples the model was trained on (training + validation).")
    final_train_rmse: Optional[float] = Field(None, description="Training RMSE of the last epoch.")
    final_val_rmse: Optional[float] = Field(None, description="Validation RMSE of the last epoch.")


class LayerDocument(BaseModel):
    type: str = Field(..., description="Kind of the layer, e.g. 'conv2d'.")
    config: Dict[str, Any] = Field({}, description="Constructor arguments of the layer.")
    shapes: Dict[str, List[int]] = Field({}, description="Shape of every state array.")
    values: Dict[str, List[float]] = Field({}, description="Flattened (row-major) state arrays.")


class ModelDocument(BaseModel):
    version: str = Field(..., description="Version of nomabeam which wrote the file.")
    encoding: Encoding
    n: int
    k: int
    gamma_db: Optional[float] = Field(None, description="SINR target (dB) of the training labels.")
    layers: List[LayerDocument]
    training: TrainingMetadata = TrainingMetadata()
    checksum: int = Field(..., description="CRC-32 of all parameters and buffers.")


class CnnModel:
    """Sequential network mapping encoded channels onto label vectors of length 2NK."""

    def __init__(
            self,
            encoding: Encoding,
            n: int,
            k: int,
            layers: Sequence[Layer],
            gamma_db: Optional[float] = None,
            metadata: Optional[TrainingMetadata] = None):
        self.encoding = Encoding(encoding)
        self.n = n
        self.k = k
        self.layers = list(layers)
        self.gamma_db = gamma_db
        self.metadata = metadata or TrainingMetadata()
        self.shape_chain = self._check_chain()

    @classmethod
    def build(
            cls,
            encoding: Encoding,
            n: int,
            k: int,
            gamma_db: Optional[float] = None,
            init_seed: int = 0,
            bn_eps: float = 1e-5,
            bn_momentum: float = 0.1,
            pool_include_pad: bool = True) -> 'CnnModel':
        """Creates a freshly initialized network (He normal weights, zero biases)."""
        rng = np.random.default_rng(np.random.SeedSequence(init_seed))
        channels, height, width = input_shape(encoding, n, k)
        layers: List[Layer] = []
        for _ in range(BLOCKS):
            layers.append(Conv2D(channels, FILTERS, rng))
            layers.append(BatchNorm2D(FILTERS, bn_eps, bn_momentum))
            layers.append(LeakyReLU())
            channels = FILTERS
        layers.append(MeanPool2D(pool_include_pad))
        layers.append(Dense(height * width * FILTERS, 2 * n * k, rng))
        layers.append(Tanh())
        return cls(encoding, n, k, layers, gamma_db)

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return input_shape(self.encoding, self.n, self.k)

    @property
    def output_size(self) -> int:
        return 2 * self.n * self.k

    def _check_chain(self) -> List[Tuple[int, int, int]]:
        shape = self.input_shape
        chain = [shape]
        for layer in self.layers:
            shape = layer.output_shape(shape)
            chain.append(shape)
        if shape != (self.output_size, 1, 1):
            raise ShapeMismatchError(
                f"network ends in shape {shape}, expected {self.output_size} outputs for n={self.n}, k={self.k}"
            )
        return chain

    def train(self):
        for layer in self.layers:
            layer.training = True

    def eval(self):
        for layer in self.layers:
            layer.training = False

    @property
    def training(self) -> bool:
        return any(layer.training for layer in self.layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Forward pass of a (batch, channels, height, width) array in the current mode."""
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise ShapeMismatchError(
                f"{self.encoding.value} model for n={self.n}, k={self.k} expects inputs of shape "
                f"(batch,) + {self.input_shape}, got {x.shape}"
            )
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def infer(self, x: np.ndarray) -> np.ndarray:
        """Forward pass with inference-mode batch norm; the mode is restored afterwards."""
        modes = [layer.training for layer in self.layers]
        self.eval()
        try:
            return self.forward(x)
        finally:
            for layer, mode in zip(self.layers, modes):
                layer.training = mode

    def parameters(self) -> List[np.ndarray]:
        return [param for layer in self.layers for param in layer.params.values()]

    def gradients(self) -> List[np.ndarray]:
        return [layer.grads[name] for layer in self.layers for name in layer.params]

    def checksum(self) -> int:
        crc = 0
        for layer in self.layers:
            for array in layer.state().values():
                crc = binascii.crc32(np.ascontiguousarray(array, dtype='<f8').tobytes(), crc)
        return crc

    def to_document(self) -> ModelDocument:
        from .. import __version__
        return ModelDocument(
            version=__version__,
            encoding=self.encoding,
            n=self.n,
            k=self.k,
            gamma_db=self.gamma_db,
            layers=[
                LayerDocument(
                    type=layer.kind,
                    config=layer.config(),
                    shapes={name: list(array.shape) for name, array in layer.state().items()},
                    values={name: array.reshape(-1).tolist() for name, array in layer.state().items()},
                )
                for layer in self.layers
            ],
            training=self.metadata,
            checksum=self.checksum(),
        )

    @classmethod
    def from_document(cls, document: ModelDocument) -> 'CnnModel':
        from .. import __version__
        written, running = Version(document.version), Version(__version__)
        if (written.major, written.minor) != (running.major, running.minor):
            raise FormatVersionError(
                f"model written by nomabeam {document.version} cannot be read by version {__version__}"
            )
        layers = []
        for index, entry in enumerate(document.layers):
            if entry.type not in LAYER_TYPES:
                raise DatasetFormatError(f"unknown layer type '{entry.type}'", field=f"layers.{index}.type")
            try:
                layer = LAYER_TYPES[entry.type](**entry.config)
            except TypeError as e:
                raise DatasetFormatError(str(e), field=f"layers.{index}.config") from e
            state = layer.state()
            if set(entry.values) != set(state) or set(entry.shapes) != set(state):
                raise DatasetFormatError(
                    f"expected state arrays {sorted(state)}, got {sorted(entry.values)}",
                    field=f"layers.{index}.values"
                )
            for name, array in state.items():
                values = np.asarray(entry.values[name], dtype=np.float64)
                if tuple(entry.shapes[name]) != array.shape or values.size != array.size:
                    raise ShapeMismatchError(
                        f"layer {index} ({entry.type}): '{name}' has shape {entry.shapes[name]} "
                        f"and {values.size} values, expected shape {list(array.shape)}"
                    )
                array[...] = values.reshape(array.shape)
            layers.append(layer)
        model = cls(document.encoding, document.n, document.k, layers, document.gamma_db, document.training)
        if model.checksum() != document.checksum:
            raise DatasetFormatError("parameters do not match the stored checksum", field='checksum')
        model.eval()
        return model


def save_model(model: CnnModel, path):
    with open(path, 'w', encoding='utf-8') as file_out:
        file_out.write(model.to_document().json())
        file_out.write('\n')
    logger.debug(f"Model written to {path} (checksum {model.checksum():08x})")


def load_model(path) -> CnnModel:
    """Reads a model file; shapes, version and checksum are validated."""
    with open(path, 'r', encoding='utf-8') as file_in:
        text = file_in.read()
    try:
        document = ModelDocument.parse_raw(text)
    except ValidationError as e:
        first = e.errors()[0]
        field = '.'.join(str(part) for part in first['loc'])
        raise DatasetFormatError(first['msg'], field=field) from e
    except (json.JSONDecodeError, ValueError) as e:
        raise DatasetFormatError(f"invalid model document: {e}") from e
    return CnnModel.from_document(document)


def _check_channel(model: CnnModel, c: ChannelSet):
    if (c.n, c.k) != (model.n, model.k):
        raise ShapeMismatchError(
            f"model trained for n={model.n}, k={model.k} cannot serve a channel with n={c.n}, k={c.k}"
        )


def predict_batch(model: CnnModel, channels: Sequence[ChannelSet]) -> List[DirectionMatrix]:
    """Unit-norm directions predicted for every channel."""
    for c in channels:
        _check_channel(model, c)
    outputs = model.infer(encode_batch(model.encoding, channels))
    return [label_decode(output, model.n, model.k) for output in outputs]


def predict_directions(model: CnnModel, c: ChannelSet) -> DirectionMatrix:
    return predict_batch(model, [c])[0]


__all__ = [
    'CnnModel',
    'ModelDocument',
    'LayerDocument',
    'TrainingMetadata',
    'save_model',
    'load_model',
    'predict_batch',
    'predict_directions',
]
