"""
Mini-batch training of the beamforming network with Adam and a step learning rate.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator

from ..channel import DatasetSample, RngStream, dataset_parameters
from ..errors import InsufficientSamplesError
from .encoding import Encoding, encode_batch, label_encode
from .functional import rmse_loss
from .model import CnnModel, TrainingMetadata
from .optim import Adam

logger = logging.getLogger(__name__)

# Stream ids of the shuffle seed
_SPLIT_STREAM = 0
_EPOCH_STREAM = 1


class TrainConfig(BaseModel):
    epochs: int = Field(100, description="Number of passes over the training split.")
    batch_size: int = Field(200, description="Mini-batch size. Incomplete last batches are dropped.")
    lr0: float = Field(0.01, description="Initial learning rate.")
    lr_drop_epoch: int = Field(50, description="Number of epochs run at the initial learning rate.")
    lr_factor: float = Field(0.5, description="Factor applied to the learning rate after lr_drop_epoch epochs.")
    val_fraction: float = Field(0.2, description="Share of the samples held out for validation.")
    beta1: float = Field(0.9, description="Adam decay rate of the first moment.")
    beta2: float = Field(0.999, description="Adam decay rate of the second moment.")
    eps_adam: float = Field(1e-8, description="Adam denominator offset.")
    shuffle_seed: int = Field(0, ge=0, description="Seed of the validation split and of the epoch shuffles.")
    init_seed: int = Field(0, ge=0, description="Seed of the weight initialization.")
    bn_eps: float = Field(1e-5, description="Batch norm variance offset.")
    bn_momentum: float = Field(0.1, description="Batch norm running statistics momentum.")
    pool_include_pad: bool = Field(
        True,
        description="When True, mean pooling always divides by 9; otherwise by the number of "
        "non-padded positions in the window."
    )

    @validator('epochs', 'lr_drop_epoch')
    def check_non_negative(cls, value, field):
        if value < 0 or (field.name == 'epochs' and value < 1):
            raise ValueError(f"{field.name} out of range")
        return value

    @validator('batch_size')
    def check_batch_size(cls, value):
        if value < 2:
            raise ValueError("batch_size must be at least 2 for batch normalization")
        return value

    @validator('val_fraction')
    def check_val_fraction(cls, value):
        if not 0 < value < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        return value

    @validator('lr_factor')
    def check_lr_factor(cls, value):
        if not 0 < value <= 1:
            raise ValueError("lr_factor must lie in (0, 1]")
        return value

    @validator('lr0', 'eps_adam', 'bn_eps')
    def check_positive(cls, value, field):
        if not value > 0:
            raise ValueError(f"{field.name} must be positive")
        return value

    @root_validator(skip_on_failure=True)
    def check_betas(cls, values):
        for name in ('beta1', 'beta2', 'bn_momentum'):
            if not 0 <= values[name] < 1:
                raise ValueError(f"{name} must lie in [0, 1)")
        return values

    def learning_rate(self, epoch: int) -> float:
        """Learning rate of the (0-based) ``epoch``."""
        return self.lr0 if epoch < self.lr_drop_epoch else self.lr0 * self.lr_factor


@dataclass
class TrainReport:
    train_rmse: List[float] = field(default_factory=list)
    val_rmse: List[float] = field(default_factory=list)
    epoch_seconds: List[float] = field(default_factory=list)
    checksum: int = 0

    @property
    def epochs(self) -> int:
        return len(self.train_rmse)


def _arrays(samples: Sequence[DatasetSample], encoding: Encoding) -> Tuple[np.ndarray, np.ndarray]:
    x = encode_batch(encoding, [sample.channel for sample in samples])
    y = np.stack([label_encode(sample.u) for sample in samples])
    return x, y


def evaluate_rmse(model: CnnModel, x: np.ndarray, y: np.ndarray, batch_size: int = 500) -> float:
    """Inference-mode RMSE (mean of the per-sample RMSE)."""
    if x.shape[0] == 0:
        raise InsufficientSamplesError("no samples to evaluate")
    total = 0.0
    for start in range(0, x.shape[0], batch_size):
        loss, _ = rmse_loss(model.infer(x[start:start + batch_size]), y[start:start + batch_size])
        total += loss * min(batch_size, x.shape[0] - start)
    return total / x.shape[0]


def train(
        samples: Sequence[DatasetSample],
        encoding: Encoding,
        cfg: TrainConfig = None) -> Tuple[CnnModel, TrainReport]:
    """Trains a network on the optimal samples of a uniform dataset."""
    cfg = cfg or TrainConfig()
    encoding = Encoding(encoding)
    samples = list(samples)
    n, k, _, gamma_db = dataset_parameters(samples)
    usable = [sample for sample in samples if sample.is_optimal]
    if len(usable) < len(samples):
        logger.warning(f"{len(samples) - len(usable)} non-optimal sample(s) excluded from training")

    order = RngStream(cfg.shuffle_seed, _SPLIT_STREAM).generator().permutation(len(usable))
    val_count = int(round(cfg.val_fraction * len(usable)))
    train_count = len(usable) - val_count
    if val_count < 1 or train_count < cfg.batch_size:
        raise InsufficientSamplesError(
            f"{len(usable)} optimal samples give {train_count} training and {val_count} validation "
            f"samples, at least one batch of {cfg.batch_size} and one validation sample are needed"
        )
    x, y = _arrays(usable, encoding)
    x_train, y_train = x[order[:train_count]], y[order[:train_count]]
    x_val, y_val = x[order[train_count:]], y[order[train_count:]]

    model = CnnModel.build(
        encoding, n, k, gamma_db,
        init_seed=cfg.init_seed,
        bn_eps=cfg.bn_eps,
        bn_momentum=cfg.bn_momentum,
        pool_include_pad=cfg.pool_include_pad
    )
    optimizer = Adam(model.parameters(), cfg.beta1, cfg.beta2, cfg.eps_adam)
    shuffler = RngStream(cfg.shuffle_seed, _EPOCH_STREAM).generator()
    batches = train_count // cfg.batch_size
    logger.info(
        f"Training {encoding.value} (n={n}, k={k}, gamma={gamma_db} dB) on {train_count} samples, "
        f"validating on {val_count}, {batches} batches per epoch"
    )

    report = TrainReport()
    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        lr = cfg.learning_rate(epoch)
        permutation = shuffler.permutation(train_count)
        model.train()
        loss_sum = 0.0
        for batch in range(batches):
            index = permutation[batch * cfg.batch_size:(batch + 1) * cfg.batch_size]
            prediction = model.forward(x_train[index])
            loss, grad = rmse_loss(prediction, y_train[index])
            model.backward(grad)
            optimizer.step(model.gradients(), lr)
            loss_sum += loss
        report.train_rmse.append(loss_sum / batches)
        report.val_rmse.append(evaluate_rmse(model, x_val, y_val))
        report.epoch_seconds.append(time.perf_counter() - started)
        logger.info(
            f"Epoch {epoch + 1}/{cfg.epochs}: lr {lr:g}, train RMSE {report.train_rmse[-1]:.6f}, "
            f"validation RMSE {report.val_rmse[-1]:.6f}"
        )

    model.eval()
    model.metadata = TrainingMetadata(
        init_seed=cfg.init_seed,
        shuffle_seed=cfg.shuffle_seed,
        config=cfg.dict(),
        samples=len(usable),
        final_train_rmse=report.train_rmse[-1],
        final_val_rmse=report.val_rmse[-1],
    )
    report.checksum = model.checksum()
    return model, report


__all__ = [
    'TrainConfig',
    'TrainReport',
    'train',
    'evaluate_rmse',
]
