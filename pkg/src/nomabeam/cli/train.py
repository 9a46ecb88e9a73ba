"""
This file contains the command to train a beamforming network on a dataset.
"""
import logging
import os

import click

from ..channel import load_dataset
from ..cnn import Encoding, TrainConfig, save_model, train
from ..config import RunConfig
from ..evalbench import LearningCurveRow, emit_csv, learning_curves
from ._common import echo_summary, handle_errors, output_path

logger = logging.getLogger(__name__)


@click.command()
@click.option('--data', type=click.Path(exists=True, dir_okay=False), required=True, help='Training dataset (JSON Lines).')
@click.option('--encoding', type=click.Choice([e.value for e in Encoding]), default=Encoding.FCNN.value, show_default=True, help='Channel encoding.')
@click.option('--epochs', type=int, default=100, show_default=True)
@click.option('--batch', type=int, default=200, show_default=True, help='Mini-batch size.')
@click.option('--lr', type=float, default=0.01, show_default=True, help='Initial learning rate.')
@click.option('--lr-drop-epoch', type=int, default=50, show_default=True, help='Epochs before the learning rate drops.')
@click.option('--lr-factor', type=float, default=0.5, show_default=True, help='Learning rate factor after the drop.')
@click.option('--val-fraction', type=float, default=0.2, show_default=True, help='Share of samples used for validation.')
@click.option('--pool-include-pad/--pool-exclude-pad', default=True, show_default=True, help='Mean pooling divisor includes padded positions.')
@click.option('--seed', type=click.IntRange(min=0), required=True, help='Seed of the initialization, the validation split and the shuffles.')
@click.option('--out', type=click.Path(dir_okay=False), required=True, callback=output_path, help='Model file.')
@click.option('--curve', type=click.Path(dir_okay=False), callback=output_path, help='Learning curve CSV.  [default: <out>.curve.csv]')
@handle_errors
def cli(data, encoding, epochs, batch, lr, lr_drop_epoch, lr_factor, val_fraction, pool_include_pad, seed, out, curve):
    """Trains a TCNN or FCNN model on a labeled dataset"""
    config = RunConfig(
        seed=seed,
        train=TrainConfig(
            epochs=epochs,
            batch_size=batch,
            lr0=lr,
            lr_drop_epoch=lr_drop_epoch,
            lr_factor=lr_factor,
            val_fraction=val_fraction,
            shuffle_seed=seed,
            init_seed=seed,
            pool_include_pad=pool_include_pad,
        ),
    )
    samples = list(load_dataset(data))
    model, report = train(samples, Encoding(encoding), config.train)

    save_model(model, out)
    if not curve:
        curve = os.path.splitext(out)[0] + '.curve.csv'
    emit_csv(learning_curves({model.encoding: report}), curve, LearningCurveRow)
    logger.info(f"Model written to {out}, learning curve to {curve}")

    echo_summary({
        'command': 'train',
        'encoding': model.encoding.value,
        'out': out,
        'curve': curve,
        'epochs': report.epochs,
        'final_train_rmse': report.train_rmse[-1],
        'final_val_rmse': report.val_rmse[-1],
        'checksum': f"{report.checksum:08x}",
    })
