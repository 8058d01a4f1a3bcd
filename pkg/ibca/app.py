#!/usr/bin/env python

import argparse
import logging.config
import sys

from ibca import settings, NAME, VERSION
from ibca.error_handlers import handle_exception

log = logging.getLogger(__name__)


def build_parser():
    parser = argparse.ArgumentParser(
        prog=NAME,
        description='Information-bottleneck causal attention for multi-label image recognition')
    parser.add_argument('--version', action='version', version='{} {}'.format(NAME, VERSION))
    subparsers = parser.add_subparsers(dest='command', required=True)

    for entry in settings.get_command_mapping()['command_mapping']:
        log.debug("Registering command: {} as {}".format(entry['command'], entry['name']))
        command_class = settings.get_command_class(entry['command'])
        subparser = subparsers.add_parser(entry['name'], help=entry['description'],
                                          description=entry['description'])
        command_class.add_arguments(subparser)
        subparser.set_defaults(command_class=command_class)
    return parser


def main(argv=None):
    logging.config.fileConfig(settings.LOGGING_CONF, disable_existing_loggers=False)
    args = build_parser().parse_args(argv)
    try:
        return args.command_class().run(args) or 0
    except Exception as e:
        return handle_exception(e)


if __name__ == "__main__":
    sys.exit(main())
