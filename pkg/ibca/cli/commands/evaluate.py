import logging
from os import path

from ibca.cli.base import Command, add_config_arguments, resolve_run_config, ensure_dir
from ibca.data.datasets import make_dataset, select_split
from ibca.data.manifest import load_manifest
from ibca.datamodel.serializers import format_report, write_report, write_per_class_table
from ibca.objective.checkpoint import load_checkpoint
from ibca.objective.trainer import evaluate_model

log = logging.getLogger(__name__)


class EvalCommand(Command):

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument('--checkpoint', required=True, help='checkpoint written by train')
        parser.add_argument('--manifest', required=True, help='manifest with path,<class...> header')
        parser.add_argument('--split', default='all', choices=['all', 'train', 'val', 'test'],
                            help='evaluate on a seeded split of the manifest (default: every row)')
        parser.add_argument('--threshold', type=float, default=None,
                            help='binarization threshold (default: the checkpoint training threshold)')
        parser.add_argument('--out', default=None, help='report directory (default: next to the checkpoint)')
        add_config_arguments(parser)

    def run(self, args):
        run_config = resolve_run_config(args)
        model, train_config = load_checkpoint(args.checkpoint)
        manifest = select_split(load_manifest(args.manifest, run_config.data.image_root), args.split,
                                run_config.data)
        dataset = make_dataset(manifest, model.config, run_config.data)
        threshold = args.threshold if args.threshold is not None else train_config.threshold
        report = evaluate_model(model, dataset, threshold, train_config.batch_size, run_config.data.num_workers)

        out_dir = ensure_dir(args.out or path.join(path.dirname(path.abspath(args.checkpoint)),
                                                   'eval-{}'.format(args.split)))
        write_report(report, path.join(out_dir, 'report.txt'), path.join(out_dir, 'report.csv'),
                     manifest.class_names, path.join(out_dir, 'report.yaml'))
        write_per_class_table(report, path.join(out_dir, 'per_class.csv'), manifest.class_names)
        print(format_report(report, manifest.class_names), end='')
        log.info("Wrote evaluation report to {}".format(out_dir))
        return 0
