"""
This file contains the command to predict beam directions for channels and to
verify them with the power recovery.
"""
import logging
from typing import List, Optional

import click
import numpy as np
from pydantic import BaseModel, Field

from ..channel import load_dataset
from ..cnn import load_model, predict_directions
from ..errors import DegenerateOutputError, SingularDiagonalError
from ..evalbench import GAMMA_ATOL, test_rmse
from ..precoding import SinrSpec, verify_solution
from ._common import echo_summary, handle_errors, output_path

logger = logging.getLogger(__name__)


class PredictionRecord(BaseModel):
    index: int = Field(..., description="0-based position of the channel in the input file.")
    u_re: Optional[List[List[float]]] = Field(None, description="Real part of the N x K directions.")
    u_im: Optional[List[List[float]]] = Field(None, description="Imaginary part of the N x K directions.")
    p: Optional[List[float]] = Field(None, description="Recovered powers.")
    total_power: Optional[float] = None
    achieved_sinr: Optional[List[float]] = None
    sic_order: Optional[List[bool]] = Field(None, description="Per user: whether the received powers allow SIC.")
    feasible: bool = False
    error: Optional[str] = Field(None, description="Why no directions could be derived.")


@click.command()
@click.option('--model', 'model_path', type=click.Path(exists=True, dir_okay=False), required=True, help='Model file.')
@click.option('--channel', type=click.Path(exists=True, dir_okay=False), required=True, help='Channels (JSON Lines dataset).')
@click.option('--gamma-db', type=float, help='SINR target in dB.  [default: target of the model]')
@click.option('--out', type=click.Path(dir_okay=False), callback=output_path, help='Report file.  [default: standard output]')
@handle_errors
def cli(model_path, channel, gamma_db, out):
    """Predicts beam directions with a model and recovers the powers"""
    model = load_model(model_path)
    samples = list(load_dataset(channel))
    if gamma_db is None:
        gamma_db = model.gamma_db if model.gamma_db is not None else 5.0

    records = []
    for index, sample in enumerate(samples):
        gamma = SinrSpec.uniform(sample.k, gamma_db)
        try:
            u = predict_directions(model, sample.channel)
            report = verify_solution(sample.channel, u, gamma)
        except (DegenerateOutputError, SingularDiagonalError) as e:
            logger.warning(f"Channel {index}: {e}")
            records.append(PredictionRecord(index=index, error=str(e)))
            continue
        records.append(PredictionRecord(
            index=index,
            u_re=u.u.real.tolist(),
            u_im=u.u.imag.tolist(),
            p=report.p.tolist(),
            total_power=report.total,
            achieved_sinr=report.achieved_sinr.tolist(),
            sic_order=report.sic_order.tolist(),
            feasible=report.feasible,
        ))

    lines = [record.json(exclude_none=True) for record in records]
    if out:
        with open(out, 'w', encoding='utf-8', newline='\n') as file_out:
            file_out.writelines(line + '\n' for line in lines)
    else:
        for line in lines:
            click.echo(line)

    feasible = [record.total_power for record in records if record.feasible]
    summary = {
        'command': 'predict',
        'count': len(records),
        'feasibility_rate': len(feasible) / len(records) if records else 0.0,
        'mean_total_power': float(np.mean(feasible)) if feasible else None,
    }
    labeled = [sample for sample in samples if abs(sample.gamma_db - gamma_db) <= GAMMA_ATOL and sample.is_optimal]
    if labeled:
        summary['test_rmse'] = test_rmse(model, labeled)
    if out:
        echo_summary(summary)
    else:
        logger.info(f"Summary: {summary}")
