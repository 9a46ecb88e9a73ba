import io

import numpy as np
import pytest

from helpers import random_channels
from nomabeam.channel import generate_dataset
from nomabeam.cnn import CnnModel, Encoding, TrainConfig, TrainReport, train
from nomabeam.errors import DatasetMismatchError, InsufficientSamplesError, MissingModelError
from nomabeam.evalbench import (
    LearningCurveRow,
    Method,
    PowerCurvePoint,
    TimingRecord,
    bench_time,
    emit_csv,
    learning_curves,
    power_curve,
    read_csv,
    select_model,
    test_rmse,
    write_csv,
)
from nomabeam.socp import Labeler


@pytest.fixture(scope='module')
def models():
    return [
        CnnModel.build(Encoding.FCNN, 2, 2, gamma_db=5.0, init_seed=1),
        CnnModel.build(Encoding.TCNN, 2, 2, gamma_db=5.0, init_seed=2),
    ]


def _by_gamma(points):
    table = {}
    for point in points:
        table.setdefault(point.gamma_db, {})[point.method] = point
    return table


def test_power_curve(tiny_dataset, models):
    points = power_curve(tiny_dataset, models, [5.0, 0.0], transfer_gamma=True)
    assert len(points) == 10
    assert [point.sort_key() for point in points] == sorted(point.sort_key() for point in points)
    assert (points[0].method, points[0].gamma_db) == (Method.LABEL, 0.0)
    table = _by_gamma(points)
    for gamma_db, row in table.items():
        assert set(row) == set(Method)
        label = row[Method.LABEL].mean_total_power
        for method, point in row.items():
            assert label <= point.mean_total_power * (1 + 1e-6)
            assert point.sample_count == row[Method.LABEL].sample_count
        assert row[Method.MRC].feasibility_rate == 1.0
        assert row[Method.ZF].feasibility_rate == 1.0
    assert table[0.0][Method.LABEL].mean_total_power < table[5.0][Method.LABEL].mean_total_power


def test_power_curve_baselines_only(tiny_dataset):
    points = power_curve(tiny_dataset, [], [5.0])
    assert [point.method for point in points] == [Method.LABEL, Method.MRC, Method.ZF]


def test_power_curve_workers(tiny_dataset):
    inline = power_curve(tiny_dataset[:8], [], [5.0], workers=1)
    pooled = power_curve(tiny_dataset[:8], [], [5.0], workers=2)
    assert inline == pooled


def test_single_user_methods_coincide():
    points = power_curve(random_channels(10, 4, 1), [], [5.0])
    totals = {point.method: point.mean_total_power for point in points}
    assert totals[Method.MRC] == pytest.approx(totals[Method.LABEL], rel=1e-6)
    assert totals[Method.ZF] == pytest.approx(totals[Method.LABEL], rel=1e-6)


def test_power_curve_strict_gamma(tiny_dataset, models):
    with pytest.raises(MissingModelError):
        power_curve(tiny_dataset, models, [0.0])
    power_curve(tiny_dataset[:4], models, [5.0])


def test_power_curve_rejects_mismatch(tiny_dataset):
    with pytest.raises(DatasetMismatchError):
        power_curve(tiny_dataset, [CnnModel.build(Encoding.FCNN, 4, 3)], [5.0])
    with pytest.raises(InsufficientSamplesError):
        power_curve([], [], [5.0])


def test_select_model():
    low = CnnModel.build(Encoding.FCNN, 2, 2, gamma_db=0.0)
    high = CnnModel.build(Encoding.FCNN, 2, 2, gamma_db=10.0)
    tcnn = CnnModel.build(Encoding.TCNN, 2, 2, gamma_db=5.0)
    candidates = [high, low, tcnn]
    assert select_model(candidates, Encoding.FCNN, 10.0) is high
    assert select_model(candidates, Encoding.FCNN, 5.0, transfer_gamma=True) is low
    assert select_model(candidates, Encoding.FCNN, 7.5, transfer_gamma=True) is high
    with pytest.raises(MissingModelError):
        select_model(candidates, Encoding.FCNN, 5.0)
    with pytest.raises(MissingModelError):
        select_model([low], Encoding.TCNN, 0.0, transfer_gamma=True)


def test_learning_curves():
    reports = {
        Encoding.FCNN: TrainReport(train_rmse=[0.4, 0.3], val_rmse=[0.5, 0.35]),
        Encoding.TCNN: TrainReport(train_rmse=[0.45, 0.32], val_rmse=[0.5, 0.4]),
    }
    rows = learning_curves(reports)
    assert [(row.encoding, row.epoch) for row in rows] == [
        (Encoding.TCNN, 1), (Encoding.TCNN, 2), (Encoding.FCNN, 1), (Encoding.FCNN, 2)
    ]
    assert rows[-1].val_rmse == 0.35
    reports[Encoding.TCNN] = TrainReport(train_rmse=[0.45], val_rmse=[0.5])
    with pytest.raises(DatasetMismatchError):
        learning_curves(reports)


def test_csv_header_only(tmp_path):
    path = tmp_path / 'empty.csv'
    emit_csv([], path, TimingRecord)
    assert path.read_text() == 'method,median_s,p95_s,instance_count\n'
    assert read_csv(path) == []
    with pytest.raises(ValueError):
        write_csv([], io.StringIO())


def test_csv_reemit_is_identical(tmp_path, tiny_dataset, models):
    first = tmp_path / 'first.csv'
    emit_csv(power_curve(tiny_dataset[:6], models, [5.0]), first, PowerCurvePoint)
    parsed = [
        PowerCurvePoint(
            gamma_db=float(row['gamma_db']),
            method=Method(row['method']),
            mean_total_power=float(row['mean_total_power']),
            feasibility_rate=float(row['feasibility_rate']),
            sample_count=int(row['sample_count']),
        )
        for row in read_csv(first)
    ]
    second = tmp_path / 'second.csv'
    emit_csv(reversed(parsed), second, PowerCurvePoint)
    assert second.read_bytes() == first.read_bytes()


def test_learning_curve_csv(tmp_path):
    path = tmp_path / 'curve.csv'
    emit_csv(learning_curves({Encoding.FCNN: TrainReport(train_rmse=[0.25], val_rmse=[0.5])}), path, LearningCurveRow)
    assert read_csv(path) == [{'epoch': '1', 'encoding': 'fcnn', 'train_rmse': '0.25', 'val_rmse': '0.5'}]


def test_bench_time(models):
    records = bench_time(random_channels(30, 2, 2), models, 5.0, instances=40)
    assert [record.method for record in records] == [Method.LABEL, Method.FCNN, Method.TCNN]
    for record in records:
        assert record.instance_count == 30
        assert 0 < record.median_s <= record.p95_s


def test_bench_time_needs_enough_instances(tiny_dataset, models):
    with pytest.raises(InsufficientSamplesError):
        bench_time(tiny_dataset, models, 5.0)
    with pytest.raises(InsufficientSamplesError):
        bench_time(random_channels(40, 2, 2), [], 5.0, instances=10)


def test_test_rmse(tiny_dataset, models):
    value = test_rmse(models[0], tiny_dataset)
    assert np.isfinite(value) and value > 0
    assert test_rmse(models[0], tiny_dataset[:4] + tiny_dataset[4:]) == value
    with pytest.raises(InsufficientSamplesError):
        test_rmse(models[0], [])


def test_power_curve_with_fewer_antennas_than_users():
    points = power_curve(random_channels(6, 2, 3), [], [5.0])
    totals = {point.method: point for point in points}
    assert totals[Method.ZF].feasibility_rate == 0.0
    assert np.isnan(totals[Method.ZF].mean_total_power)
    assert totals[Method.LABEL].sample_count > 0
    assert totals[Method.MRC].feasibility_rate == 1.0
    assert totals[Method.LABEL].mean_total_power <= totals[Method.MRC].mean_total_power * (1 + 1e-6)


@pytest.mark.slow
def test_full_scale_comparison():
    samples = list(generate_dataset(200, 4, 3, 0.1, 5.0, seed=31, labeler=Labeler(), workers=2))
    table = _by_gamma(power_curve(samples, [], [0.0, 2.5, 5.0, 7.5, 10.0], workers=2))
    for row in table.values():
        assert row[Method.LABEL].mean_total_power <= row[Method.ZF].mean_total_power * (1 + 1e-6)
        assert row[Method.LABEL].mean_total_power <= row[Method.MRC].mean_total_power * (1 + 1e-6)
        assert row[Method.LABEL].feasibility_rate == 1.0
    # MRC is closer to the label at low targets
    mrc_excess = {
        gamma_db: row[Method.MRC].mean_total_power / row[Method.LABEL].mean_total_power
        for gamma_db, row in table.items()
    }
    assert mrc_excess[0.0] < mrc_excess[10.0]


@pytest.fixture(scope='module')
def desk_run():
    """Both encodings trained on 2000 samples at 5 dB, with a separate 500-sample test set."""
    samples = list(generate_dataset(2000, 4, 3, 0.1, 5.0, seed=41, labeler=Labeler(), workers=4))
    test_set = list(generate_dataset(500, 4, 3, 0.1, 5.0, seed=42, labeler=Labeler(), workers=4))
    cfg = TrainConfig(epochs=30, batch_size=100, lr_drop_epoch=20, shuffle_seed=5, init_seed=5)
    models = [train(samples, encoding, cfg)[0] for encoding in Encoding]
    return models, test_set


@pytest.mark.slow
def test_desk_scale_network_power(desk_run):
    models, test_set = desk_run
    row = _by_gamma(power_curve(test_set, models, [5.0], workers=4))[5.0]
    fcnn = row[Method.FCNN].mean_total_power
    assert fcnn <= row[Method.MRC].mean_total_power
    assert fcnn <= row[Method.ZF].mean_total_power
    assert 10 * np.log10(fcnn / row[Method.LABEL].mean_total_power) <= 2.0
    assert row[Method.FCNN].feasibility_rate >= 0.95


@pytest.mark.slow
def test_desk_scale_inference_time(desk_run):
    models, test_set = desk_run
    records = {record.method: record for record in bench_time(test_set, models, 5.0, instances=50)}
    for encoding in Encoding:
        assert records[Method(encoding.value)].median_s <= 0.1 * records[Method.LABEL].median_s
