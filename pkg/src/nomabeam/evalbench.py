"""
Experiments comparing the solver labels, the trained networks and the MRC/ZF
baselines: transmit power over the SINR target, learning curves and per-instance
computation time. Results are plain records which :func:`emit_csv` writes as CSV.
"""
import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass
from enum import Enum
from itertools import repeat
from typing import ClassVar, Dict, List, Mapping, Optional, Sequence, TextIO, Tuple, Type, Union

import numpy as np

from .channel import ChannelSet, DatasetSample
from .cnn.encoding import Encoding, encode_batch, label_decode, label_encode
from .cnn.model import CnnModel, predict_directions
from .cnn.training import TrainReport, evaluate_rmse
from .errors import (
    DatasetMismatchError,
    DegenerateOutputError,
    InsufficientSamplesError,
    MissingModelError,
    NomaBeamError,
    SingularDiagonalError,
    ZFUndefinedError,
)
from .precoding import DirectionMatrix, SinrSpec, mrc_directions, power_allocation, zf_directions
from .socp import Labeler, SolverOptions, solve_power_min

logger = logging.getLogger(__name__)

# Fewest instances for which timing statistics are reported
MIN_TIMING_INSTANCES = 30
# Grid points and model targets closer than this are the same SINR target
GAMMA_ATOL = 1e-9


class Method(str, Enum):
    LABEL = "label"
    TCNN = "tcnn"
    FCNN = "fcnn"
    MRC = "mrc"
    ZF = "zf"


_METHOD_ORDER = {method: index for index, method in enumerate(Method)}
_ENCODING_ORDER = {encoding: index for index, encoding in enumerate(Encoding)}


@dataclass(frozen=True)
class PowerCurvePoint:
    """Mean total power of one method at one SINR target.

    The mean is taken over the samples feasible for every compared method, the
    feasibility rate over all samples. A method feasible for no sample is left out
    of the comparison and reported with a NaN mean.
    """
    HEADER: ClassVar[Tuple[str, ...]] = ('gamma_db', 'method', 'mean_total_power', 'feasibility_rate', 'sample_count')
    gamma_db: float
    method: Method
    mean_total_power: float
    feasibility_rate: float
    sample_count: int

    def sort_key(self):
        return (_METHOD_ORDER[Method(self.method)], self.gamma_db)


@dataclass(frozen=True)
class LearningCurveRow:
    HEADER: ClassVar[Tuple[str, ...]] = ('epoch', 'encoding', 'train_rmse', 'val_rmse')
    epoch: int
    encoding: Encoding
    train_rmse: float
    val_rmse: float

    def sort_key(self):
        return (_ENCODING_ORDER[Encoding(self.encoding)], self.epoch)


@dataclass(frozen=True)
class TimingRecord:
    HEADER: ClassVar[Tuple[str, ...]] = ('method', 'median_s', 'p95_s', 'instance_count')
    method: Method
    median_s: float
    p95_s: float
    instance_count: int

    def sort_key(self):
        return (_METHOD_ORDER[Method(self.method)],)


Record = Union[PowerCurvePoint, LearningCurveRow, TimingRecord]


def _channels(test_set: Sequence[Union[ChannelSet, DatasetSample]]) -> List[ChannelSet]:
    return [item.channel if isinstance(item, DatasetSample) else item for item in test_set]


def _check_models(models: Sequence[CnnModel], channels: Sequence[ChannelSet]):
    n, k = channels[0].n, channels[0].k
    for c in channels:
        if (c.n, c.k) != (n, k):
            raise DatasetMismatchError(f"test set mixes n={n}, k={k} with n={c.n}, k={c.k}")
    for model in models:
        if (model.n, model.k) != (n, k):
            raise DatasetMismatchError(
                f"{model.encoding.value} model for n={model.n}, k={model.k} does not match "
                f"the test set with n={n}, k={k}"
            )


def select_model(
        models: Sequence[CnnModel],
        encoding: Encoding,
        gamma_db: float,
        transfer_gamma: bool = False) -> CnnModel:
    """Model of ``encoding`` trained at ``gamma_db``.

    With ``transfer_gamma`` the model of the nearest SINR target stands in when
    there is no exact match (ties go to the lower target).
    """
    candidates = [model for model in models if model.encoding == Encoding(encoding)]
    for model in candidates:
        if model.gamma_db is not None and abs(model.gamma_db - gamma_db) <= GAMMA_ATOL:
            return model
    if transfer_gamma and candidates:
        known = [model for model in candidates if model.gamma_db is not None] or candidates
        model = min(known, key=lambda m: (abs((m.gamma_db or 0.0) - gamma_db), m.gamma_db or 0.0))
        logger.warning(
            f"No {Encoding(encoding).value} model for {gamma_db} dB, using the one trained at {model.gamma_db} dB"
        )
        return model
    raise MissingModelError(f"no {Encoding(encoding).value} model trained for {gamma_db} dB")


def _label_totals(channels, gamma_db: float, opts: SolverOptions, workers: int) -> np.ndarray:
    labeler = Labeler(opts)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            solutions = list(executor.map(labeler, channels, repeat(gamma_db), chunksize=16))
    else:
        solutions = [labeler(c, gamma_db) for c in channels]
    return np.array([s.total_power if s.is_optimal else np.nan for s in solutions])


def _directions(channels, make) -> List[Optional[DirectionMatrix]]:
    """Directions per channel, None where they are undefined."""
    directions = []
    for index, c in enumerate(channels):
        try:
            directions.append(make(c))
        except (ZFUndefinedError, DegenerateOutputError) as e:
            logger.debug(f"Sample {index}: {e}")
            directions.append(None)
    return directions


def _decoded(model: CnnModel, channels) -> List[Optional[DirectionMatrix]]:
    outputs = iter(model.infer(encode_batch(model.encoding, channels)))
    return _directions(channels, lambda c: label_decode(next(outputs), model.n, model.k))


def _fixed_direction_totals(channels, gamma: SinrSpec, directions) -> np.ndarray:
    totals = np.full(len(channels), np.nan)
    for index, (c, u) in enumerate(zip(channels, directions)):
        if u is None:
            continue
        try:
            report = power_allocation(c, u, gamma)
        except SingularDiagonalError as e:
            logger.debug(f"Sample {index}: {e}")
            continue
        if report.feasible:
            totals[index] = report.total
    return totals


def power_curve(
        test_set: Sequence[Union[ChannelSet, DatasetSample]],
        models: Sequence[CnnModel],
        gamma_grid_db: Sequence[float],
        opts: Optional[SolverOptions] = None,
        transfer_gamma: bool = False,
        workers: int = 1) -> List[PowerCurvePoint]:
    """Mean total power of every method at every SINR target.

    The label solutions are recomputed for every target, also when the test set
    already carries labels.
    """
    channels = _channels(test_set)
    if not channels:
        raise InsufficientSamplesError("test set is empty")
    models = list(models)
    _check_models(models, channels)
    opts = opts or SolverOptions()
    encodings = [encoding for encoding in Encoding if any(m.encoding == encoding for m in models)]
    k = channels[0].k

    points = []
    for gamma_db in gamma_grid_db:
        gamma_db = float(gamma_db)
        gamma = SinrSpec.uniform(k, gamma_db)
        totals: Dict[Method, np.ndarray] = {Method.LABEL: _label_totals(channels, gamma_db, opts, workers)}
        for encoding in encodings:
            model = select_model(models, encoding, gamma_db, transfer_gamma)
            totals[Method(encoding.value)] = _fixed_direction_totals(channels, gamma, _decoded(model, channels))
        totals[Method.MRC] = _fixed_direction_totals(channels, gamma, _directions(channels, mrc_directions))
        totals[Method.ZF] = _fixed_direction_totals(channels, gamma, _directions(channels, zf_directions))

        # Methods feasible nowhere (ZF with n < k) do not empty the intersection
        compared = [values for values in totals.values() if np.any(np.isfinite(values))]
        common = np.all([np.isfinite(values) for values in compared], axis=0) if compared \
            else np.zeros(len(channels), dtype=bool)
        if not np.any(common):
            logger.warning(f"No sample is feasible for every compared method at {gamma_db} dB")
        for method, values in totals.items():
            feasible = values[common]
            mean = np.mean(feasible) if feasible.size and np.all(np.isfinite(feasible)) else np.nan
            points.append(PowerCurvePoint(
                gamma_db=gamma_db,
                method=method,
                mean_total_power=float(mean),
                feasibility_rate=float(np.mean(np.isfinite(values))),
                sample_count=int(np.sum(common)),
            ))
        logger.info(
            f"{gamma_db} dB: " + ', '.join(
                f"{point.method.value} {point.mean_total_power:.6g}" for point in points[-len(totals):]
            )
        )
    return sorted(points, key=PowerCurvePoint.sort_key)


def learning_curves(reports: Mapping[Encoding, TrainReport]) -> List[LearningCurveRow]:
    """Per-epoch training and validation RMSE of runs sharing the same epoch count."""
    counts = {Encoding(encoding): report.epochs for encoding, report in reports.items()}
    if len(set(counts.values())) > 1:
        raise DatasetMismatchError(f"training runs have different epoch counts {counts}")
    rows = [
        LearningCurveRow(epoch=epoch, encoding=Encoding(encoding), train_rmse=float(train), val_rmse=float(val))
        for encoding, report in reports.items()
        for epoch, (train, val) in enumerate(zip(report.train_rmse, report.val_rmse), start=1)
    ]
    return sorted(rows, key=LearningCurveRow.sort_key)


def _timing(method: Method, durations: List[float]) -> TimingRecord:
    if len(durations) < MIN_TIMING_INSTANCES:
        raise InsufficientSamplesError(
            f"{len(durations)} timed instances, at least {MIN_TIMING_INSTANCES} are needed"
        )
    return TimingRecord(
        method=method,
        median_s=float(np.median(durations)),
        p95_s=float(np.percentile(durations, 95)),
        instance_count=len(durations),
    )


def bench_time(
        test_set: Sequence[Union[ChannelSet, DatasetSample]],
        models: Sequence[CnnModel],
        gamma_db: float,
        opts: Optional[SolverOptions] = None,
        instances: int = 50,
        warmup: int = 3) -> List[TimingRecord]:
    """Wall-clock time per channel of the label solve (cone program build and solve)
    and of every network (encode, forward, decode and power recovery). All methods
    run on the same channels in this process."""
    channels = _channels(test_set)[:instances]
    models = list(models)
    if channels:
        _check_models(models, channels)
    opts = opts or SolverOptions()
    gamma = SinrSpec.uniform(channels[0].k, gamma_db) if channels else None

    def label(c):
        solve_power_min(c, gamma, opts)

    def network(model):
        def run(c):
            try:
                power_allocation(c, predict_directions(model, c), gamma)
            except NomaBeamError as e:
                logger.debug(f"{model.encoding.value}: {e}")
        return run

    methods = [(Method.LABEL, label)] + [(Method(model.encoding.value), network(model)) for model in models]
    records = []
    for method, run in methods:
        for c in channels[:warmup]:
            run(c)
        durations = []
        for c in channels:
            started = time.perf_counter()
            run(c)
            durations.append(time.perf_counter() - started)
        records.append(_timing(method, durations))
        logger.info(
            f"{method.value}: median {records[-1].median_s * 1e3:.3f} ms, p95 {records[-1].p95_s * 1e3:.3f} ms"
        )
    return records


def test_rmse(model: CnnModel, samples: Sequence[DatasetSample]) -> float:
    """Inference-mode RMSE of ``model`` against the labels of the optimal samples."""
    usable = [sample for sample in samples if sample.is_optimal]
    if not usable:
        raise InsufficientSamplesError("no optimal samples to test on")
    x = encode_batch(model.encoding, [sample.channel for sample in usable])
    y = np.stack([label_encode(sample.u) for sample in usable])
    return evaluate_rmse(model, x, y)


# Keeps pytest from collecting the function where it is imported
test_rmse.__test__ = False


def _cell(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_csv(records: Sequence[Record], stream: TextIO, record_type: Optional[Type] = None):
    """Writes records with a header row, sorted by method (or encoding) first."""
    records = list(records)
    if record_type is None:
        if not records:
            raise ValueError("the record type of an empty record list must be given")
        record_type = type(records[0])
    writer = csv.writer(stream)
    writer.writerow(record_type.HEADER)
    for record in sorted(records, key=record_type.sort_key):
        writer.writerow([_cell(value) for value in astuple(record)])


def emit_csv(records: Sequence[Record], path, record_type: Optional[Type] = None):
    with open(path, 'w', encoding='utf-8', newline='') as file_out:
        write_csv(records, file_out, record_type)


def read_csv(path) -> List[Dict[str, str]]:
    with open(path, 'r', encoding='utf-8', newline='') as file_in:
        return list(csv.DictReader(file_in))


__all__ = [
    'Method',
    'PowerCurvePoint',
    'LearningCurveRow',
    'TimingRecord',
    'select_model',
    'power_curve',
    'learning_curves',
    'bench_time',
    'test_rmse',
    'write_csv',
    'emit_csv',
    'read_csv',
    'MIN_TIMING_INSTANCES',
]
