"""
This file contains the command to generate a labeled dataset.
"""
import logging

import click
import numpy as np

from ..channel import SolverStatus, generate_dataset, save_dataset
from ..config import RunConfig, default_workers
from ..errors import NomaBeamError
from ..precoding import SinrSpec, check_sic_order, verify_solution
from ..socp import Labeler, SolverOptions
from ._common import SolverFailure, echo_summary, handle_errors, output_path

logger = logging.getLogger(__name__)

# Share of numerical failures above which the solver is considered broken
MAX_FAILURE_RATE = 0.1
# Relative deviation allowed between a label total and its recovered power
LABEL_CHECK_RTOL = 1e-6


class _Tally:
    """Counts the label outcomes while the samples stream to disk."""

    def __init__(self):
        self.count = 0
        self.optimal = 0
        self.failures = 0
        self.sic_ok = 0
        self.verified = 0
        self.power = 0.0

    def track(self, samples):
        for sample in samples:
            self.count += 1
            if sample.is_optimal:
                self.optimal += 1
                self.power += sample.total_power
                self.sic_ok += int(np.all(check_sic_order(sample.channel, sample.u, sample.p)))
                self.verified += int(self.verify(sample))
            elif sample.status == SolverStatus.NUMERICAL_FAILURE:
                self.failures += 1
            yield sample

    def verify(self, sample) -> bool:
        try:
            report = verify_solution(sample.channel, sample.u, SinrSpec.uniform(sample.k, sample.gamma_db))
        except NomaBeamError as e:
            logger.warning(f"Sample {sample.stream_id}: label directions cannot be verified, {e}")
            return False
        if not report.feasible or not np.isclose(report.total, sample.total_power, rtol=LABEL_CHECK_RTOL, atol=0.0):
            logger.warning(
                f"Sample {sample.stream_id}: label total {sample.total_power:.6g} does not match the "
                f"recovered total {report.total:.6g} (feasible={report.feasible})"
            )
            return False
        return True

    def rate(self, value: int, total: int) -> float:
        return value / total if total else 0.0


@click.command()
@click.option('--n', 'n', type=int, default=4, show_default=True, help='Number of transmit antennas.')
@click.option('--k', 'k', type=int, default=3, show_default=True, help='Number of users.')
@click.option('--sigma2', type=float, default=0.1, show_default=True, help='Noise variance.')
@click.option('--gamma-db', type=float, default=5.0, show_default=True, help='Minimum SINR of every user in dB.')
@click.option('--count', type=int, default=20000, show_default=True, help='Number of samples.')
@click.option('--seed', type=click.IntRange(min=0), required=True, help='Master seed; sample i uses stream i of it.')
@click.option('--workers', type=int, default=default_workers, help='Worker processes.  [default: CPU count]')
@click.option('--tol', type=float, default=1e-8, show_default=True, help='Solver gap and feasibility tolerance.')
@click.option('--max-iter', type=int, default=100, show_default=True, help='Solver iteration limit.')
@click.option('--out', type=click.Path(dir_okay=False), required=True, callback=output_path, help='Dataset file (JSON Lines).')
@handle_errors
def cli(n, k, sigma2, gamma_db, count, seed, workers, tol, max_iter, out):
    """Draws Rayleigh channels and labels them with the minimum-power solution"""
    config = RunConfig(
        n=n,
        k=k,
        sigma2=sigma2,
        gamma_db=gamma_db,
        count=count,
        seed=seed,
        workers=workers,
        solver=SolverOptions(tol_gap=tol, tol_feas=tol, max_iter=max_iter),
    )
    logger.info(f"Generating {count} samples (n={n}, k={k}, sigma2={sigma2}, gamma={gamma_db} dB) with {workers} worker(s)")
    samples = generate_dataset(
        config.count,
        config.n,
        config.k,
        config.sigma2,
        config.gamma_db,
        config.seed,
        Labeler(config.solver),
        workers=config.workers
    )
    tally = _Tally()
    written = save_dataset(tally.track(samples), out)
    logger.info(f"Dataset written to {out}")

    echo_summary({
        'command': 'gen-data',
        'out': out,
        'count': written,
        'feasibility_rate': tally.rate(tally.optimal, written),
        'mean_label_power': tally.power / tally.optimal if tally.optimal else None,
        'sic_order_rate': tally.rate(tally.sic_ok, tally.optimal),
        'label_verified_rate': tally.rate(tally.verified, tally.optimal),
        'numerical_failure_rate': tally.rate(tally.failures, written),
    })
    if tally.rate(tally.failures, written) > MAX_FAILURE_RATE:
        raise SolverFailure(
            f"{tally.failures} of {written} label solves failed numerically, the solver setup is broken"
        )
