"""
Helpers shared by the commands: console logging, the mapping of library errors
onto exit codes and option parsing.

Exit codes: 0 success, 1 unexpected failure, 2 usage error, 3 systemic solver
failure, 4 data, model or encoding mismatch (including malformed input files).
"""
import functools
import json
import logging
import os
from typing import Any, Dict, List

import click
from pydantic import ValidationError

from ..errors import (
    DatasetFormatError,
    DatasetMismatchError,
    DegenerateOutputError,
    InsufficientSamplesError,
    NomaBeamError,
    ShapeMismatchError,
)

LEVEL_STYLES = {
    logging.DEBUG: ("DEBUG", "white"),
    logging.INFO: ("INFO", "blue"),
    logging.WARNING: ("WARNING", "yellow"),
    logging.ERROR: ("ERROR", "red"),
    logging.CRITICAL: ("ERROR", "red"),
}


class ClickLogHandler(logging.Handler):
    """Writes log records to standard error as ``LEVEL: message`` with a coloured
    level tag."""

    def emit(self, record):
        try:
            tag, colour = LEVEL_STYLES.get(record.levelno, (record.levelname, None))
            click.echo(click.style(tag, fg=colour) + f": {self.format(record)}", err=True)
        except Exception:
            self.handleError(record)


def configure_logging(verbose: bool = False, quiet: bool = False):
    logger = logging.getLogger('nomabeam')
    for handler in list(logger.handlers):
        if isinstance(handler, ClickLogHandler):
            logger.removeHandler(handler)
    logger.addHandler(ClickLogHandler())
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO)
    logger.propagate = False


class CommandFailure(click.ClickException):
    exit_code = 1

    def show(self, file=None):
        click.echo(click.style("Error", fg="red") + f": {self.format_message()}", err=True)


class SolverFailure(CommandFailure):
    exit_code = 3


class MismatchFailure(CommandFailure):
    exit_code = 4


_MISMATCH_ERRORS = (
    DatasetFormatError,
    DatasetMismatchError,
    ShapeMismatchError,
    InsufficientSamplesError,
    DegenerateOutputError,
)


def handle_errors(command):
    """Turns library exceptions raised by ``command`` into click exceptions with the
    matching exit code."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ValidationError as e:
            raise click.UsageError(str(e))
        except _MISMATCH_ERRORS as e:
            raise MismatchFailure(str(e))
        except NomaBeamError as e:
            raise CommandFailure(str(e))
    return wrapper


def parse_floats(ctx, param, value) -> List[float]:
    """Callback of options taking a comma separated list of numbers."""
    if value is None:
        return None
    try:
        return [float(item) for item in str(value).split(',') if item.strip()]
    except ValueError:
        raise click.BadParameter(f"'{value}' is not a comma separated list of numbers")


def parse_paths(ctx, param, value) -> List[str]:
    """Callback of options taking a comma separated list of existing files."""
    if value is None:
        return None
    paths = [item.strip() for item in str(value).split(',') if item.strip()]
    if not paths:
        raise click.BadParameter("no file given")
    for path in paths:
        if not os.path.isfile(path):
            raise click.BadParameter(f"file '{path}' does not exist")
    return paths


def output_path(ctx, param, value):
    """Callback of output options: the target directory has to exist."""
    if value is None:
        return None
    directory = os.path.dirname(os.path.abspath(value))
    if not os.path.isdir(directory):
        raise click.BadParameter(f"directory '{directory}' does not exist")
    return value


def echo_summary(summary: Dict[str, Any]):
    """Machine readable summary of a command: one JSON object on standard output."""
    click.echo(json.dumps(summary))


__all__ = [
    'ClickLogHandler',
    'configure_logging',
    'CommandFailure',
    'SolverFailure',
    'MismatchFailure',
    'handle_errors',
    'parse_floats',
    'parse_paths',
    'output_path',
    'echo_summary',
]
