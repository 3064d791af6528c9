import argparse
import sys

import click

from damic import DamicError, error
from damic.commands import (
    init,
    Ablation,
    Evaluate,
    Generate,
    Pretrain,
    Train,
)

usage = """Usage: damic <command> [options]

Utility commands:
  init:             write a config file with every key at its default

Pipeline commands:
  generate:         generate the synthetic dataset
  pretrain:         pretrain a model (autoencoder, k-means, gate, experts)
  train:            train a model; writes model, history, assignments, metrics
  evaluate:         score a trained model against ground-truth labels
  ablation:         compare training variants and k-means over several seeds

Common options:
  --config PATH  --seed N  --mode MODE  --out DIR  --force
"""

# Exit code for unreadable or unwritable files
IO_EXIT_CODE = 3


def setup_and_run(cmd_class, name, remaining_args):
    cmd = cmd_class(name)
    cmd.parse_args(remaining_args)
    cmd.run()


def main(argv=None):
    command_opts = {
        'init': init.main,
        'generate': Generate,
        'pretrain': Pretrain,
        'train': Train,
        'evaluate': Evaluate,
        'ablation': Ablation,
    }

    parser = argparse.ArgumentParser(
        usage=usage,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        add_help=False)

    parser.add_argument(
        'command',
        type=str,
        choices=sorted(command_opts.keys()))

    args, remaining = parser.parse_known_args(argv)

    try:
        if args.command == 'init':
            command_opts[args.command](remaining)
        else:
            setup_and_run(command_opts[args.command], args.command, remaining)
    except DamicError as e:
        error(str(e), exception=False, exit_code=e.exit_code)
    except (IOError, OSError) as e:
        error(str(e), exception=False, exit_code=IO_EXIT_CODE)
    except click.Abort:
        error("Aborted.", exception=False)
    except KeyboardInterrupt:
        error("\n-- Stopped by user --", exception=False)


if __name__ == '__main__':
    main()
