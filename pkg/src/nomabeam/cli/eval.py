"""
This file contains the command to compare the transmit power of all methods over
a grid of SINR targets.
"""
import logging

import click

from ..channel import dataset_parameters, load_dataset
from ..cnn import load_model
from ..config import RunConfig, default_workers
from ..evalbench import GAMMA_ATOL, PowerCurvePoint, emit_csv, power_curve, test_rmse, write_csv
from ..socp import SolverOptions
from ._common import echo_summary, handle_errors, output_path, parse_floats, parse_paths

logger = logging.getLogger(__name__)


@click.command()
@click.option('--test', 'test_path', type=click.Path(exists=True, dir_okay=False), required=True, help='Test dataset (JSON Lines).')
@click.option('--models', callback=parse_paths, required=True, help='Comma separated model files.')
@click.option('--gammas', callback=parse_floats, default='0,2.5,5,7.5,10', show_default=True, help='Comma separated SINR targets in dB.')
@click.option('--strict-gamma', is_flag=True, help='Require a model trained at every SINR target instead of using the nearest one.')
@click.option('--workers', type=int, default=default_workers, help='Worker processes for the label solves.  [default: CPU count]')
@click.option('--tol', type=float, default=1e-8, show_default=True, help='Solver gap and feasibility tolerance.')
@click.option('--max-iter', type=int, default=100, show_default=True, help='Solver iteration limit.')
@click.option('--out', type=click.Path(dir_okay=False), callback=output_path, help='Power curve CSV.  [default: standard output]')
@handle_errors
def cli(test_path, models, gammas, strict_gamma, workers, tol, max_iter, out):
    """Mean transmit power of label, networks, MRC and ZF per SINR target"""
    config = RunConfig(
        gammas=gammas,
        workers=workers,
        solver=SolverOptions(tol_gap=tol, tol_feas=tol, max_iter=max_iter),
    )
    samples = list(load_dataset(test_path))
    _, _, _, test_gamma_db = dataset_parameters(samples)
    loaded = [load_model(path) for path in models]

    points = power_curve(
        samples, loaded, config.gammas, config.solver, transfer_gamma=not strict_gamma, workers=config.workers
    )
    if out:
        emit_csv(points, out, PowerCurvePoint)
    else:
        write_csv(points, click.get_text_stream('stdout'), PowerCurvePoint)

    summary = {
        'command': 'eval',
        'out': out,
        'rows': len(points),
        'test_rmse': {
            f"{model.encoding.value}@{model.gamma_db}": test_rmse(model, samples)
            for model in loaded
            if model.gamma_db is not None and abs(model.gamma_db - test_gamma_db) <= GAMMA_ATOL
            and any(sample.is_optimal for sample in samples)
        },
    }
    if out:
        echo_summary(summary)
    else:
        logger.info(f"Summary: {summary}")
