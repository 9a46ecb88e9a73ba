"""
This file contains the command to time the label solver against the networks.
"""
import logging

import click

from ..channel import dataset_parameters, load_dataset
from ..cnn import load_model
from ..config import RunConfig
from ..evalbench import MIN_TIMING_INSTANCES, TimingRecord, bench_time, emit_csv, write_csv
from ..socp import SolverOptions
from ._common import echo_summary, handle_errors, output_path, parse_paths

logger = logging.getLogger(__name__)


@click.command()
@click.option('--test', 'test_path', type=click.Path(exists=True, dir_okay=False), required=True, help='Test dataset (JSON Lines).')
@click.option('--models', callback=parse_paths, required=True, help='Comma separated model files.')
@click.option('--instances', type=click.IntRange(min=MIN_TIMING_INSTANCES), default=50, show_default=True, help='Channels timed per method.')
@click.option('--gamma-db', type=float, help='SINR target in dB.  [default: target of the test set]')
@click.option('--tol', type=float, default=1e-8, show_default=True, help='Solver gap and feasibility tolerance.')
@click.option('--max-iter', type=int, default=100, show_default=True, help='Solver iteration limit.')
@click.option('--out', type=click.Path(dir_okay=False), callback=output_path, help='Timing CSV.  [default: standard output]')
@handle_errors
def cli(test_path, models, instances, gamma_db, tol, max_iter, out):
    """Wall-clock time per channel of the label solver and of every model"""
    samples = list(load_dataset(test_path))
    n, k, sigma2, test_gamma_db = dataset_parameters(samples)
    config = RunConfig(
        n=n,
        k=k,
        sigma2=sigma2,
        gamma_db=test_gamma_db if gamma_db is None else gamma_db,
        solver=SolverOptions(tol_gap=tol, tol_feas=tol, max_iter=max_iter),
    )
    loaded = [load_model(path) for path in models]

    records = bench_time(samples, loaded, config.gamma_db, config.solver, instances=instances)
    if out:
        emit_csv(records, out, TimingRecord)
        echo_summary({
            'command': 'bench',
            'out': out,
            'rows': len(records),
            'median_s': {record.method.value: record.median_s for record in records},
        })
    else:
        write_csv(records, click.get_text_stream('stdout'), TimingRecord)
