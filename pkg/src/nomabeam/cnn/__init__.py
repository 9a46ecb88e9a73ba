"""
Convolutional beamforming network written directly on numpy: channel and label
encodings, layers with analytic gradients, Adam and the training loop.
"""
from .encoding import (
    Encoding,
    Tensor3,
    encode,
    encode_batch,
    fcnn_decode,
    fcnn_encode,
    input_shape,
    label_decode,
    label_encode,
    tcnn_decode,
    tcnn_encode,
)
from .model import CnnModel, load_model, predict_batch, predict_directions, save_model
from .optim import Adam, AdamState, adam_step
from .training import TrainConfig, TrainReport, evaluate_rmse, train

__all__ = [
    'Encoding',
    'Tensor3',
    'encode',
    'encode_batch',
    'fcnn_decode',
    'fcnn_encode',
    'input_shape',
    'label_decode',
    'label_encode',
    'tcnn_decode',
    'tcnn_encode',
    'CnnModel',
    'load_model',
    'save_model',
    'predict_batch',
    'predict_directions',
    'Adam',
    'AdamState',
    'adam_step',
    'TrainConfig',
    'TrainReport',
    'evaluate_rmse',
    'train',
]
