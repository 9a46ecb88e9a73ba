"""
Exceptions raised by the library. The command line maps them onto exit codes (see
:mod:`nomabeam.cli`), the library itself never exits.
"""
from typing import Optional


class NomaBeamError(Exception):
    """Root of all errors raised by nomabeam."""


class ChannelError(NomaBeamError):
    """Invalid channel realization, e.g. an all-zero user column."""


class ZFUndefinedError(ChannelError):
    """Zero-forcing needs N >= K and a full column rank channel."""

    def __init__(self, detail: str = ""):
        message = "zf_undefined"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class SingularDiagonalError(NomaBeamError):
    """Power recovery hit a user with |h_k^H u_k| = 0."""


class DegenerateOutputError(NomaBeamError):
    """A decoded beamforming column has (nearly) zero norm."""


class ShapeMismatchError(NomaBeamError):
    """A tensor, layer or model does not have the expected shape."""


class DegenerateBatchError(ShapeMismatchError):
    """Batch normalization in training mode needs at least two samples."""


class NonFiniteGradientError(NomaBeamError):
    """The optimizer refused a step because a gradient is NaN or infinite."""


class InsufficientSamplesError(NomaBeamError):
    """Not enough samples to form a single batch or a comparison set."""


class DatasetFormatError(NomaBeamError):
    """A dataset line or model document could not be parsed.

    The (1-based) line number and the offending field are kept on the exception
    so callers can point the user to the exact location.
    """

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        if location:
            message = f"{', '.join(location)}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field


class DatasetMismatchError(NomaBeamError):
    """Data, model and encoding do not belong together."""


class MissingModelError(DatasetMismatchError):
    """No trained model for an (encoding, gamma) grid point."""


class FormatVersionError(DatasetMismatchError):
    """A model file was written by an incompatible version of nomabeam."""


__all__ = [
    'NomaBeamError',
    'ChannelError',
    'ZFUndefinedError',
    'SingularDiagonalError',
    'DegenerateOutputError',
    'ShapeMismatchError',
    'DegenerateBatchError',
    'NonFiniteGradientError',
    'InsufficientSamplesError',
    'DatasetFormatError',
    'DatasetMismatchError',
    'MissingModelError',
    'FormatVersionError',
]
