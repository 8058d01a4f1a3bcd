import logging
from os import path, makedirs, environ

from ibca import settings

log = logging.getLogger(__name__)


class Command(object):
    """
    A CLI command; subclasses declare their flags in ``add_arguments`` and
    return an exit code from ``run``
    """

    @classmethod
    def add_arguments(cls, parser):
        pass

    def run(self, args):
        raise NotImplementedError


def add_config_arguments(parser):
    parser.add_argument('--config', default=None,
                        help='YAML run config (sections model, train, data, output); default: desk preset')
    parser.add_argument('--preset', choices=sorted(settings.PRESETS), default=None,
                        help='bundled preset used when --config is not given')
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='override a config field, e.g. variant=full or train.epochs=5')


def resolve_run_config(args):
    return settings.load_run_config(args.config, args.overrides, args.preset)


def output_root(run_config):
    return environ.get('IBCA_OUTPUT_ROOT', run_config.output.root)


def make_run_dir(run_config, *parts):
    run_dir = path.join(output_root(run_config), run_config.run_name, *parts)
    makedirs(run_dir, exist_ok=True)
    return run_dir


def ensure_dir(directory):
    makedirs(directory, exist_ok=True)
    return directory
