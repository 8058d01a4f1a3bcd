import logging

from ibca.cli.base import Command, add_config_arguments, resolve_run_config
from ibca.data.datasets import make_dataset
from ibca.data.manifest import load_manifest
from ibca.evaluation.export import dump_features
from ibca.objective.checkpoint import load_checkpoint

log = logging.getLogger(__name__)


class DumpFeaturesCommand(Command):

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument('--checkpoint', required=True)
        parser.add_argument('--manifest', required=True)
        parser.add_argument('--out', default='features.csv')
        add_config_arguments(parser)

    def run(self, args):
        run_config = resolve_run_config(args)
        model, _ = load_checkpoint(args.checkpoint)
        manifest = load_manifest(args.manifest, run_config.data.image_root)
        dump_features(model, make_dataset(manifest, model.config, run_config.data), args.out)
        return 0
