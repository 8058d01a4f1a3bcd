import logging

from ibca.cli.base import Command, add_config_arguments, resolve_run_config, ensure_dir
from ibca.data.datasets import make_dataset
from ibca.data.manifest import load_manifest
from ibca.evaluation.export import export_attention
from ibca.objective.checkpoint import load_checkpoint

log = logging.getLogger(__name__)


class ExportAttentionCommand(Command):

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument('--checkpoint', required=True)
        parser.add_argument('--manifest', required=True, help='manifest listing the images to export')
        parser.add_argument('--limit', type=int, default=None, help='export only the first N rows')
        parser.add_argument('--out', default='attention')
        add_config_arguments(parser)

    def run(self, args):
        run_config = resolve_run_config(args)
        model, _ = load_checkpoint(args.checkpoint)
        manifest = load_manifest(args.manifest, run_config.data.image_root)
        if args.limit is not None:
            manifest = manifest.subset(range(min(args.limit, len(manifest))))
        dataset = make_dataset(manifest, model.config, run_config.data)
        export_attention(model, dataset, ensure_dir(args.out))
        return 0
