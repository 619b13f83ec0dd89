# -*- coding: utf-8 -*-
"""
``ghost <subcommand> --config <path> [overrides]``

Exit status: 0 on success, 2 when a run diverged (records are still
written), 1 on any error.
"""
import argparse
import logging
import os
import sys

from .. import __version__
from ..exceptions import ConfigurationError, GhostRadiusError
from .config import EXPERIMENTS, load_config
from .datasets import load_dataset, write_snapshot
from .experiments import TRAINING_EXPERIMENTS, run_experiment
from .records import emit


logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(name)s %(levelname)s %(message)s'
LOG_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO, 3: logging.DEBUG}

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIVERGED = 2


class CommandParser(argparse.ArgumentParser):
    """
    Usage errors raise ConfigurationError instead of exiting with status 2,
    which is reserved for divergence.
    """

    def error(self, message):
        raise ConfigurationError('%s: %s' % (self.prog, message))


def build_parser():
    parser = CommandParser(prog='ghost', description='Convergence-radius experiments for cross-entropy.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    parser.add_argument('experiment', choices=EXPERIMENTS)
    parser.add_argument('--config', help='key=value experiment file')
    parser.add_argument('--seed', dest='seeds', help='seed or comma-separated seeds')
    parser.add_argument('--out-dir', dest='out_dir')
    parser.add_argument('--arm', dest='arms', help='arm or comma-separated arms')
    parser.add_argument('--r-grid', dest='r_grid', help='comma-separated normalised step sizes')
    parser.add_argument('--spike-mult', dest='spike_multipliers', help='comma-separated spike multipliers')
    parser.add_argument('--rho-every', dest='rho_every', help='recompute the radius every N steps')
    parser.add_argument('--format', choices=('csv', 'jsonl'))
    parser.add_argument('--verbosity', type=int, choices=sorted(LOG_LEVELS))
    parser.add_argument(
        '--set', dest='assignments', action='append', default=[], metavar='KEY=VALUE',
        help='override any config key; may be repeated',
    )
    return parser


def _overrides(args):
    overrides = {'experiment': args.experiment}
    for assignment in args.assignments:
        if '=' not in assignment:
            raise ConfigurationError('--set expects KEY=VALUE, got %r' % assignment)
        key, value = assignment.split('=', 1)
        overrides[key.strip()] = value
    for name in ('seeds', 'out_dir', 'arms', 'r_grid', 'spike_multipliers', 'rho_every', 'format'):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.verbosity is not None:
        overrides['verbosity'] = str(args.verbosity)
    return overrides


def configure_logging(verbosity):
    logging.basicConfig(level=LOG_LEVELS.get(verbosity, logging.DEBUG), format=LOG_FORMAT)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigurationError as error:
        configure_logging(1)
        parser.print_usage(sys.stderr)
        logger.error('%s', error)
        return EXIT_ERROR
    configure_logging(1 if args.verbosity is None else args.verbosity)
    try:
        config = load_config(args.config, _overrides(args))
        logging.getLogger().setLevel(LOG_LEVELS.get(config.verbosity, logging.DEBUG))
        record = run_experiment(config)
        emit(record, config.out_dir, config.format)
        if config.experiment in TRAINING_EXPERIMENTS:
            write_snapshot(load_dataset(config), os.path.join(config.out_dir, 'dataset.csv'))
    except (GhostRadiusError, OSError) as error:
        logger.error('%s', error)
        return EXIT_ERROR
    if record.diverged:
        logger.warning('divergence detected, see %s', config.out_dir)
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
