import sys
import textwrap

import click

try:
    from importlib.metadata import version as _dist_version, PackageNotFoundError
except ImportError:  # pragma: no cover
    from importlib_metadata import version as _dist_version, PackageNotFoundError


DEFAULT_CFG_FNAME = "damic.cfg"
DEFAULT_MODEL_FNAME = "model.damic"
DEFAULT_DATASET_FNAME = "dataset.damic"
DEFAULT_LEDGER_FNAME = "ledger.db"

try:
    __version__ = _dist_version("damic")
except PackageNotFoundError:
    __version__ = "0.1.0"


def error(msg, exception=True, wrap=True, exit_code=1):
    '''Raises a DamicError, or prints an error message to stderr and exits.'''
    if exception:
        raise DamicError(msg)
    else:
        msg = quote(msg, width=75) if wrap else msg
        click.secho(msg, fg='red', err=True)
        sys.exit(exit_code)


def warn(msg):
    '''Prints a warning message to stderr.'''
    text = quote(msg, quote="!> ", nl=False)
    click.secho(text, err=True, fg='red')


def message(msg, newline=True):
    click.echo(msg, err=True, nl=newline)


def quote(text, width=72, quote="", nl=True):
    if not text:
        return ""
    out = ""
    for line in text.split("\n"):
        sublines = textwrap.wrap(line, width=width, replace_whitespace=False)
        sublines = [quote + l for l in sublines]
        out += "\n".join(sublines) + "\n"
    return out


class DamicError(Exception):
    exit_code = 1


class ConfigError(DamicError):
    """Invalid or unknown configuration values."""
    exit_code = 2


class InputError(DamicError, ValueError):
    """Arguments that violate an operation's preconditions."""
    exit_code = 2


class DataError(DamicError):
    """Unreadable, unwritable or malformed data files."""
    exit_code = 3


class FormatError(DataError):
    pass


class ConsistencyError(DataError):
    pass


class ShapeError(DamicError, ValueError):
    """Arrays whose dimensions do not fit the operation."""
    exit_code = 2


class StateError(DamicError):
    exit_code = 4


class TrainingError(DamicError):
    """Numerical divergence during training.

    `history` holds whatever was recorded before the failure.
    """
    exit_code = 4

    def __init__(self, msg, history=None):
        super(TrainingError, self).__init__(msg)
        self.history = history
