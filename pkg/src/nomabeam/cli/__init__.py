"""
This module contains all the commands provided to the user: dataset generation,
training, prediction, evaluation and benchmarking.

This file contains the multi-command which contains all the commands published
in this folder.
"""
import importlib
import os

import click

from .. import __version__
from ..config import default_map, load_manifest
from ._common import configure_logging


class NomaBeamCLI(click.MultiCommand):
    """Click multi-command for nomabeam which searches all ``.py``-files in the
    same directory for commands. Additional commands should be placed in this
    directory and define a click command named ``cli``:

    .. code-block:: python

        import click

        @click.command()
        def cli():
            pass

    The command is published under the file name, with underscores replaced by
    dashes (``gen_data.py`` becomes ``gen-data``).

    For more information, see the `Click documentation <https://click.palletsprojects.com/en/8.1.x/commands/>`_
    """
    # This is the folder this __init__.py file resides in. This is the same folder
    # in which all commands are searched for.
    PLUGIN_FOLDER = os.path.dirname(__file__)

    def list_commands(self, ctx):
        """Lists all commands in this directory. Excludes all files starting
        with an underscore."""
        commands = []
        for filename in os.listdir(self.PLUGIN_FOLDER):
            if filename.endswith('.py') and not filename.startswith('_'):
                commands.append(filename[:-3].replace('_', '-'))
        commands.sort()
        return commands

    def get_command(self, ctx, name):
        if name not in self.list_commands(ctx):
            # Return nothing, click will display a nice message for us
            return
        module = importlib.import_module(f"{__name__}.{name.replace('-', '_')}")
        return module.cli


def _load_config(ctx, param, value):
    if value is None:
        return
    try:
        manifest = load_manifest(value)
    except (OSError, ValueError) as e:
        raise click.BadParameter(f"cannot read manifest: {e}", ctx=ctx, param=param)
    ctx.default_map = default_map(manifest, ctx.command.list_commands(ctx))


@click.command(cls=NomaBeamCLI, help='Command-line tools for minimum-power NOMA beamforming.')
@click.option(
    '--config',
    type=click.Path(exists=True, dir_okay=False),
    is_eager=True,
    expose_value=False,
    callback=_load_config,
    help='TOML manifest with default values for the commands. Flags given on the command line win.'
)
@click.option('-v', '--verbose', is_flag=True, help='Log debug messages.')
@click.option('-q', '--quiet', is_flag=True, help='Only log warnings and errors.')
@click.version_option(__version__, prog_name='nomabeam')
def cli(verbose, quiet):
    configure_logging(verbose, quiet)


__all__ = [
    'cli'
]
