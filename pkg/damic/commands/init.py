# -*- coding: utf-8 -*-
"""
`damic init` writes a config file listing every key at its default, with a
one-line description above each. It does not read a config file itself, so it
does not use the Command framework.
"""
import argparse
import os

import click

from damic import DEFAULT_CFG_FNAME, __version__
from damic.config import default_config_text

overwrite_cfg_prompt = '''Existing file `{}' will be overwritten. Continue?'''

fin_msg = '''\
Created config file `{}'.

Edit it in any text editor, then run e.g. `damic train --config {}`.
Command-line options (--seed, --mode, --out) override the file.
'''


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="damic init",
        description="Write a config file with every key at its default.")
    parser.add_argument(
        '-o', '--output',
        help='Path of the config file to write',
        default=DEFAULT_CFG_FNAME)
    parser.add_argument(
        '--force',
        help='Overwrite an existing file without prompting',
        action='store_true')
    args = parser.parse_args(argv if argv is not None else [])

    cfg_fp = os.path.abspath(args.output)
    click.secho("damic v{} - config setup".format(__version__), fg='blue', err=True)
    if not args.force and os.path.isfile(cfg_fp):
        click.confirm(overwrite_cfg_prompt.format(args.output), abort=True)
    with open(cfg_fp, 'w') as cfg_file:
        cfg_file.write(default_config_text())
    click.secho(fin_msg.format(cfg_fp, args.output), fg='green', err=True)
