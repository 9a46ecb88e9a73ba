"""
Generation, ordering, validation and persistence of NOMA channel realizations and
of the labeled datasets built on top of them.

Users are always ordered by ascending channel norm, so user ``K`` (the last column)
is the strongest user and decodes every other user's signal before its own.
"""
import json
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError, root_validator, validator

from .errors import ChannelError, DatasetFormatError, DatasetMismatchError, InsufficientSamplesError

logger = logging.getLogger(__name__)


class SolverStatus(str, Enum):
    """Outcome of the label solver, stored with every dataset sample."""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class RngStream:
    """Seeded random stream. The same ``(seed, stream_id)`` pair always reproduces
    the same draws, independent of which process draws them."""
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(sequence)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Channel of ``K`` single-antenna users seen from an ``N`` antenna base station.

    Column ``j`` of ``h`` is the channel of user ``j``.
    """
    h: np.ndarray
    sigma2: float

    def __post_init__(self):
        h = np.array(self.h, dtype=np.complex128)
        if h.ndim != 2:
            raise ChannelError(f"channel matrix must be 2-dimensional, got shape {h.shape}")
        if h.shape[0] < 1 or h.shape[1] < 1:
            raise ChannelError(f"channel needs n >= 1 and k >= 1, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ChannelError("channel contains non-finite entries")
        if not self.sigma2 > 0:
            raise ChannelError(f"noise variance must be positive, got {self.sigma2}")
        zero_columns = np.flatnonzero(~np.any(h != 0, axis=0))
        if zero_columns.size:
            raise ChannelError(f"channel of user(s) {zero_columns.tolist()} is all-zero")
        h.setflags(write=False)
        object.__setattr__(self, 'h', h)
        object.__setattr__(self, 'sigma2', float(self.sigma2))

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def k(self) -> int:
        return self.h.shape[1]

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.h, axis=0)

    def is_ordered(self) -> bool:
        norms = self.column_norms()
        return bool(np.all(norms[:-1] <= norms[1:]))


def order_users(c: ChannelSet) -> ChannelSet:
    """Permutes the users into non-decreasing channel norm. Ties keep their original
    relative order."""
    permutation = np.argsort(c.column_norms(), kind='stable')
    if np.array_equal(permutation, np.arange(c.k)):
        return c
    return ChannelSet(h=c.h[:, permutation], sigma2=c.sigma2)


def sample_rayleigh(n: int, k: int, sigma2: float, rng: RngStream) -> ChannelSet:
    """Draws an i.i.d. Rayleigh channel (entries CN(0, 1)) and orders the users."""
    if n < 1 or k < 1:
        raise ChannelError(f"channel needs n >= 1 and k >= 1, got n={n}, k={k}")
    generator = rng.generator()
    real = generator.standard_normal((n, k))
    imag = generator.standard_normal((n, k))
    h = (real + 1j * imag) / np.sqrt(2.0)
    return order_users(ChannelSet(h=h, sigma2=sigma2))


@dataclass(eq=False)
class DatasetSample:
    """Ordered channel with its label directions and powers.

    Samples whose label solve did not end optimal are kept, flagged by ``status``,
    and carry all-zero labels.
    """
    channel: ChannelSet
    gamma_db: float
    u: np.ndarray
    p: np.ndarray
    total_power: float
    status: SolverStatus
    seed: int = 0
    stream_id: int = 0

    @property
    def n(self) -> int:
        return self.channel.n

    @property
    def k(self) -> int:
        return self.channel.k

    @property
    def is_optimal(self) -> bool:
        return self.status == SolverStatus.OPTIMAL


# A labeler maps (ordered channel, gamma in dB) onto a solution exposing
# ``u``, ``p``, ``total_power`` and ``status``; see :class:`nomabeam.socp.Labeler`.
Labeler = Callable[[ChannelSet, float], object]


def label_sample(
        n: int,
        k: int,
        sigma2: float,
        gamma_db: float,
        seed: int,
        stream_id: int,
        labeler: Labeler) -> DatasetSample:
    """Draws the channel of stream ``stream_id`` and labels it."""
    channel = sample_rayleigh(n, k, sigma2, RngStream(seed, stream_id))
    solution = labeler(channel, gamma_db)
    status = SolverStatus(solution.status)
    if status == SolverStatus.OPTIMAL:
        u = np.asarray(solution.u, dtype=np.complex128)
        p = np.asarray(solution.p, dtype=np.float64)
        total_power = float(np.sum(p))
    else:
        logger.warning(f"Sample {stream_id}: label solver ended with status '{status.value}'")
        u = np.zeros((n, k), dtype=np.complex128)
        p = np.zeros(k)
        total_power = 0.0
    return DatasetSample(
        channel=channel,
        gamma_db=float(gamma_db),
        u=u,
        p=p,
        total_power=total_power,
        status=status,
        seed=seed,
        stream_id=stream_id,
    )


def _label_task(arguments: Tuple) -> DatasetSample:
    return label_sample(*arguments)


def generate_dataset(
        count: int,
        n: int,
        k: int,
        sigma2: float,
        gamma_db: float,
        seed: int,
        labeler: Labeler,
        workers: int = 1,
        first_stream: int = 0) -> Iterator[DatasetSample]:
    """Generates ``count`` labeled samples. Sample ``i`` owns the random stream
    ``first_stream + i``, so the output does not depend on ``workers``.

    Solver failures are recorded in the sample, they never abort the batch.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    return _generate(count, n, k, sigma2, gamma_db, seed, labeler, workers, first_stream)


def _generate(count, n, k, sigma2, gamma_db, seed, labeler, workers, first_stream):
    tasks = (
        (n, k, sigma2, gamma_db, seed, first_stream + index, labeler)
        for index in range(count)
    )
    if workers <= 1:
        for task in tasks:
            yield _label_task(task)
        return
    chunksize = max(1, count // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        # map() keeps the submission order
        yield from executor.map(_label_task, tasks, chunksize=chunksize)


# JSON Lines persistence ---------------------------------------------------------------------------

class SampleRecord(BaseModel):
    """One line of a dataset file. Complex matrices are split into real and imaginary
    parts, stored row-major as arrays of rows."""
    n: int = Field(..., ge=1, description="Number of base station antennas.")
    k: int = Field(..., ge=1, description="Number of users.")
    sigma2: float = Field(..., gt=0, description="Noise variance (linear).")
    gamma_db: float = Field(..., description="Common SINR target of all users in dB.")
    h_re: List[List[float]] = Field(..., description="Real part of the N x K channel.")
    h_im: List[List[float]] = Field(..., description="Imaginary part of the N x K channel.")
    u_re: List[List[float]] = Field(..., description="Real part of the N x K label directions.")
    u_im: List[List[float]] = Field(..., description="Imaginary part of the N x K label directions.")
    p: List[float] = Field(..., description="Label powers, one per user (linear).")
    total_power: float = Field(..., ge=0, description="Sum of the label powers.")
    status: SolverStatus = Field(..., description="Outcome of the label solver.")
    seed: int = Field(0, description="Seed of the random stream of this sample.")
    stream_id: int = Field(0, ge=0, description="Stream id of this sample.")

    @validator('p')
    def check_powers(cls, value, values):
        if 'k' in values and len(value) != values['k']:
            raise ValueError(f"expected {values['k']} powers, got {len(value)}")
        if any(power < 0 for power in value):
            raise ValueError("powers must be non-negative")
        return value

    @root_validator(skip_on_failure=True)
    def check_shapes(cls, values):
        shape = (values['n'], values['k'])
        for name in ('h_re', 'h_im', 'u_re', 'u_im'):
            rows = values[name]
            if len(rows) != shape[0] or any(len(row) != shape[1] for row in rows):
                raise ValueError(f"field '{name}' must be a {shape[0]} x {shape[1]} matrix")
        return values

    @classmethod
    def from_sample(cls, sample: DatasetSample) -> 'SampleRecord':
        return cls(
            n=sample.n,
            k=sample.k,
            sigma2=sample.channel.sigma2,
            gamma_db=sample.gamma_db,
            h_re=sample.channel.h.real.tolist(),
            h_im=sample.channel.h.imag.tolist(),
            u_re=sample.u.real.tolist(),
            u_im=sample.u.imag.tolist(),
            p=np.asarray(sample.p, dtype=np.float64).tolist(),
            total_power=float(sample.total_power),
            status=sample.status,
            seed=sample.seed,
            stream_id=sample.stream_id,
        )

    def to_sample(self) -> DatasetSample:
        h = np.array(self.h_re) + 1j * np.array(self.h_im)
        u = np.array(self.u_re) + 1j * np.array(self.u_im)
        return DatasetSample(
            channel=ChannelSet(h=h.reshape(self.n, self.k), sigma2=self.sigma2),
            gamma_db=self.gamma_db,
            u=u.reshape(self.n, self.k),
            p=np.array(self.p, dtype=np.float64),
            total_power=self.total_power,
            status=self.status,
            seed=self.seed,
            stream_id=self.stream_id,
        )


def dump_sample(sample: DatasetSample) -> str:
    """Serializes a sample to one JSON line (without newline)."""
    return SampleRecord.from_sample(sample).json()


_KEY_PATTERN = re.compile(r'"(\w+)"\s*:')


def parse_sample(line: str, line_number: Optional[int] = None) -> DatasetSample:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as e:
        # Name the last key which was read completely, a truncated line breaks off after it
        keys = _KEY_PATTERN.findall(line[:e.pos])
        raise DatasetFormatError(
            f"malformed JSON ({e.msg} at column {e.colno})",
            line=line_number,
            field=keys[-1] if keys else None
        ) from e
    if not isinstance(raw, dict):
        raise DatasetFormatError("expected a JSON object", line=line_number)
    try:
        record = SampleRecord.parse_obj(raw)
    except ValidationError as e:
        error = e.errors()[0]
        location = '.'.join(str(part) for part in error['loc'])
        raise DatasetFormatError(error['msg'], line=line_number, field=location) from e
    try:
        return record.to_sample()
    except ChannelError as e:
        raise DatasetFormatError(str(e), line=line_number, field='h_re') from e


def save_dataset(samples: Iterable[DatasetSample], path) -> int:
    """Writes the samples as JSON Lines and returns the number of lines written."""
    count = 0
    with open(path, 'w', encoding='utf-8', newline='\n') as file_out:
        for sample in samples:
            file_out.write(dump_sample(sample))
            file_out.write('\n')
            count += 1
    return count


def load_dataset(path) -> Iterator[DatasetSample]:
    """Streams the samples of a JSON Lines dataset. Blank lines are skipped, an
    empty file yields nothing."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset '{path}' does not exist")
    return _read_lines(path)


def _read_lines(path) -> Iterator[DatasetSample]:
    with open(path, 'r', encoding='utf-8') as file_in:
        for line_number, line in enumerate(file_in, start=1):
            if not line.strip():
                continue
            yield parse_sample(line, line_number)


def dataset_parameters(samples: Iterable[DatasetSample]) -> Tuple[int, int, float, float]:
    """Common (n, k, sigma2, gamma_db) of a dataset. Mixed datasets are refused."""
    parameters = None
    for index, sample in enumerate(samples):
        current = (sample.n, sample.k, sample.channel.sigma2, sample.gamma_db)
        if parameters is None:
            parameters = current
        elif current != parameters:
            raise DatasetMismatchError(
                f"sample {index} has (n, k, sigma2, gamma_db) = {current}, expected {parameters}"
            )
    if parameters is None:
        raise InsufficientSamplesError("dataset is empty")
    return parameters


__all__ = [
    'SolverStatus',
    'RngStream',
    'ChannelSet',
    'DatasetSample',
    'SampleRecord',
    'order_users',
    'sample_rayleigh',
    'label_sample',
    'generate_dataset',
    'dump_sample',
    'parse_sample',
    'save_dataset',
    'load_dataset',
    'dataset_parameters',
]
