import csv
import io
import json

import pytest
from click.testing import CliRunner

from nomabeam import __version__
from nomabeam.cli import cli
from nomabeam.cnn import CnnModel, Encoding, load_model, save_model


def run(*args):
    return CliRunner().invoke(cli, ['-q'] + [str(arg) for arg in args])


def summary(result):
    return json.loads(result.stdout.strip().splitlines()[-1])


def gen_data(out, count=32, seed=3, gamma_db=5.0):
    return run(
        'gen-data', '--n', 2, '--k', 2, '--gamma-db', gamma_db, '--count', count,
        '--seed', seed, '--workers', 1, '--out', out
    )


@pytest.fixture(scope='module')
def workspace(tmp_path_factory):
    """Dataset of 32 samples at 5 dB and an FCNN trained on it for one epoch."""
    root = tmp_path_factory.mktemp('cli')
    result = gen_data(root / 'data.jsonl')
    assert result.exit_code == 0, result.output
    result = run(
        'train', '--data', root / 'data.jsonl', '--epochs', 1, '--batch', 4, '--val-fraction', 0.25,
        '--seed', 1, '--out', root / 'fcnn.json'
    )
    assert result.exit_code == 0, result.output
    return root


def test_version():
    result = CliRunner().invoke(cli, ['--version'])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_commands_are_listed():
    result = CliRunner().invoke(cli, ['--help'])
    for command in ('bench', 'eval', 'gen-data', 'predict', 'train'):
        assert command in result.output


def test_gen_data_is_reproducible(tmp_path):
    first = gen_data(tmp_path / 'a.jsonl', count=6)
    second = gen_data(tmp_path / 'b.jsonl', count=6)
    assert first.exit_code == second.exit_code == 0
    assert (tmp_path / 'a.jsonl').read_bytes() == (tmp_path / 'b.jsonl').read_bytes()
    report = summary(first)
    assert report['count'] == 6
    assert report['feasibility_rate'] == 1.0
    assert 0.0 <= report['sic_order_rate'] <= 1.0
    assert report['numerical_failure_rate'] == 0.0
    assert report['label_verified_rate'] == 1.0
    assert report['mean_label_power'] > 0


def test_gen_data_usage_errors(tmp_path):
    assert gen_data(tmp_path / 'a.jsonl', count=0).exit_code == 2
    assert run('gen-data', '--count', 2, '--out', tmp_path / 'a.jsonl').exit_code == 2
    assert gen_data(tmp_path / 'missing' / 'a.jsonl').exit_code == 2
    assert gen_data(tmp_path / 'negative.jsonl', seed=-1).exit_code == 2
    assert not (tmp_path / 'negative.jsonl').exists()


def test_gen_data_solver_failure(tmp_path):
    result = run(
        'gen-data', '--n', 2, '--k', 2, '--count', 3, '--seed', 1, '--workers', 1,
        '--max-iter', 1, '--out', tmp_path / 'a.jsonl'
    )
    assert result.exit_code == 3


def test_train_outputs(workspace):
    model = load_model(workspace / 'fcnn.json')
    assert model.encoding == Encoding.FCNN
    assert model.gamma_db == 5.0
    with open(workspace / 'fcnn.curve.csv', newline='') as file_in:
        rows = list(csv.DictReader(file_in))
    assert [row['epoch'] for row in rows] == ['1']
    assert rows[0]['encoding'] == 'fcnn'


def test_train_summary(workspace, tmp_path):
    result = run(
        'train', '--data', workspace / 'data.jsonl', '--encoding', 'tcnn', '--epochs', 1, '--batch', 4,
        '--val-fraction', 0.25, '--seed', 2, '--out', tmp_path / 'tcnn.json', '--curve', tmp_path / 'curve.csv'
    )
    assert result.exit_code == 0, result.output
    report = summary(result)
    assert report['encoding'] == 'tcnn'
    assert report['epochs'] == 1
    assert report['checksum'] == f"{load_model(tmp_path / 'tcnn.json').checksum():08x}"
    assert (tmp_path / 'curve.csv').exists()


def test_train_errors(workspace, tmp_path):
    assert run('train', '--seed', 1, '--out', tmp_path / 'm.json').exit_code == 2
    assert run('train', '--data', workspace / 'data.jsonl', '--seed', -1, '--out', tmp_path / 'm.json').exit_code == 2
    too_large = run(
        'train', '--data', workspace / 'data.jsonl', '--batch', 100, '--seed', 1, '--out', tmp_path / 'm.json'
    )
    assert too_large.exit_code == 4
    assert gen_data(tmp_path / 'other.jsonl', count=4, gamma_db=10.0).exit_code == 0
    mixed = tmp_path / 'mixed.jsonl'
    mixed.write_text((workspace / 'data.jsonl').read_text() + (tmp_path / 'other.jsonl').read_text())
    result = run('train', '--data', mixed, '--epochs', 1, '--batch', 4, '--seed', 1, '--out', tmp_path / 'm.json')
    assert result.exit_code == 4


def test_train_malformed_dataset(tmp_path):
    path = tmp_path / 'broken.jsonl'
    path.write_text('{"h_re": [[1.0]]\n')
    result = run('train', '--data', path, '--seed', 1, '--out', tmp_path / 'm.json')
    assert result.exit_code == 4


def test_predict_to_stdout(workspace):
    result = run('predict', '--model', workspace / 'fcnn.json', '--channel', workspace / 'data.jsonl')
    assert result.exit_code == 0, result.output
    records = [json.loads(line) for line in result.stdout.strip().splitlines()]
    assert [record['index'] for record in records] == list(range(32))
    for record in records:
        assert len(record['u_re']) == 2 and len(record['p']) == 2
        assert 'error' not in record
        assert record['feasible'] and record['total_power'] > 0


def test_predict_to_file(workspace, tmp_path):
    out = tmp_path / 'predictions.jsonl'
    result = run('predict', '--model', workspace / 'fcnn.json', '--channel', workspace / 'data.jsonl', '--out', out)
    assert result.exit_code == 0, result.output
    assert len(out.read_text().splitlines()) == 32
    report = summary(result)
    assert report['count'] == 32
    assert report['test_rmse'] > 0


def test_predict_shape_mismatch(workspace, tmp_path):
    save_model(CnnModel.build(Encoding.FCNN, 4, 3, gamma_db=5.0), tmp_path / 'large.json')
    result = run('predict', '--model', tmp_path / 'large.json', '--channel', workspace / 'data.jsonl')
    assert result.exit_code == 4


def test_eval_to_stdout(workspace):
    result = run(
        'eval', '--test', workspace / 'data.jsonl', '--models', workspace / 'fcnn.json',
        '--gammas', '5', '--workers', 1
    )
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader(io.StringIO(result.stdout)))
    assert [row['method'] for row in rows] == ['label', 'fcnn', 'mrc', 'zf']
    assert all(row['gamma_db'] == '5.0' for row in rows)


def test_eval_to_file(workspace, tmp_path):
    out = tmp_path / 'curve.csv'
    result = run(
        'eval', '--test', workspace / 'data.jsonl', '--models', workspace / 'fcnn.json',
        '--gammas', '5,10', '--workers', 1, '--out', out
    )
    assert result.exit_code == 0, result.output
    report = summary(result)
    assert report['rows'] == 8
    assert set(report['test_rmse']) == {'fcnn@5.0'}
    with open(out, newline='') as file_in:
        assert len(list(csv.DictReader(file_in))) == 8


def test_eval_strict_gamma(workspace):
    result = run(
        'eval', '--test', workspace / 'data.jsonl', '--models', workspace / 'fcnn.json',
        '--gammas', '0', '--strict-gamma', '--workers', 1
    )
    assert result.exit_code == 4


def test_eval_missing_model(workspace):
    result = run('eval', '--test', workspace / 'data.jsonl', '--models', workspace / 'none.json')
    assert result.exit_code == 2


def test_bench(workspace, tmp_path):
    out = tmp_path / 'timing.csv'
    result = run(
        'bench', '--test', workspace / 'data.jsonl', '--models', workspace / 'fcnn.json',
        '--instances', 30, '--out', out
    )
    assert result.exit_code == 0, result.output
    assert set(summary(result)['median_s']) == {'label', 'fcnn'}
    with open(out, newline='') as file_in:
        rows = list(csv.DictReader(file_in))
    assert [row['method'] for row in rows] == ['label', 'fcnn']
    assert all(row['instance_count'] == '30' for row in rows)


def test_bench_instance_minimum(workspace):
    result = run('bench', '--test', workspace / 'data.jsonl', '--models', workspace / 'fcnn.json', '--instances', 10)
    assert result.exit_code == 2


def test_manifest_defaults(tmp_path):
    manifest = tmp_path / 'run.toml'
    manifest.write_text('seed = 3\nworkers = 1\nn = 2\nk = 2\n\n[gen-data]\ncount = 5\n')
    result = run('--config', manifest, 'gen-data', '--out', tmp_path / 'a.jsonl')
    assert result.exit_code == 0, result.output
    assert summary(result)['count'] == 5
    result = run('--config', manifest, 'gen-data', '--count', 2, '--out', tmp_path / 'b.jsonl')
    assert summary(result)['count'] == 2
    first_lines = (tmp_path / 'a.jsonl').read_text().splitlines()
    assert (tmp_path / 'b.jsonl').read_text().splitlines() == first_lines[:2]


def test_eval_option_validation(workspace, tmp_path):
    base = ['eval', '--test', workspace / 'data.jsonl', '--models', workspace / 'fcnn.json']
    assert run(*base, '--workers', 0).exit_code == 2
    assert run(*base, '--gammas', ',').exit_code == 2
    manifest = tmp_path / 'run.toml'
    manifest.write_text('[eval]\nworkers = 0\n')
    assert run('--config', manifest, *base).exit_code == 2
