import abc
import argparse
import os

import click
import yaml

from damic import ConfigError, __version__, message, warn
from damic.config import RunConfig
from damic.utils import is_nonempty_dir, mkdirp, specfile


def read_command_options():
    with open(specfile('commands')) as handle:
        return yaml.safe_load(handle)


def build_parser(name, opts):
    """Turn the options declared for a command into an argparse parser."""
    parser = argparse.ArgumentParser(
        prog="damic " + name, description=opts[name]['_meta']['help'])
    declared = dict((k, v) for k, v in opts[name].items() if not k.startswith('_'))
    if not opts[name].get('_exclude'):
        declared = dict(opts['_common'], **declared)
    for opt, spec in sorted(declared.items()):
        flag = '--' + opt
        if spec.get('argtype') == 'flag':
            parser.add_argument(flag, action='store_true', help=spec['help'])
        else:
            parser.add_argument(flag, help=spec['help'],
                                type=int if spec.get('type') == 'int' else str)
    return parser


class Command(abc.ABC):

    """A damic command: parses its options, resolves the run config and runs.

    :param name: the command name, used to find its options in the specfile
    """

    # Commands that fill an output directory refuse a non-empty one
    writes_output = True

    def __init__(self, name):
        self.name = name
        self.parser = build_parser(name, read_command_options())
        self.cfg = None

    @abc.abstractmethod
    def run(self):
        return

    def parse_args(self, argv, quiet=False):
        args = self.parser.parse_args(argv)
        self.args = vars(args)
        for k, v in self.args.items():
            setattr(self, k, v)
        overrides = dict(seed=self.args.get('seed'), mode=self.args.get('mode'),
                         out=self.args.get('out'))
        self.cfg = RunConfig.from_file(self.args.get('config'), overrides)
        if not quiet:
            self._pprint_args()

    def _pprint_args(self):
        message(click.style(
            "damic {}, v{}".format(self.name, __version__), fg='green'))
        for arg, val in sorted(self.args.items()):
            if val is None or val == "":
                val = click.style("None", fg='red')
            message(click.style("  - {}: {}".format(arg, val), fg='blue'))

    def output(self, fname):
        return os.path.join(self.cfg.out, fname)

    def prepare_output(self, echo_config=True):
        """Create the output directory and echo the resolved config into it."""
        if self.writes_output and is_nonempty_dir(self.cfg.out):
            if not self.args.get('force'):
                raise ConfigError(
                    "Output directory {} is not empty; use --force to write "
                    "into it anyway".format(self.cfg.out))
            warn("Writing into non-empty directory " + self.cfg.out)
        mkdirp(self.cfg.out)
        if echo_config:
            self.cfg.write(self.output('config.cfg'))
