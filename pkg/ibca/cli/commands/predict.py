import csv
import logging

from ibca.cli.base import Command, add_config_arguments, resolve_run_config
from ibca.data.datasets import make_dataset
from ibca.data.manifest import load_manifest
from ibca.objective.checkpoint import load_checkpoint
from ibca.objective.trainer import predict_dataset

log = logging.getLogger(__name__)


class PredictCommand(Command):

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument('--checkpoint', required=True)
        parser.add_argument('--manifest', required=True,
                            help='manifest listing the images; label cells are ignored')
        parser.add_argument('--out', default='predictions.csv')
        add_config_arguments(parser)

    def run(self, args):
        run_config = resolve_run_config(args)
        model, train_config = load_checkpoint(args.checkpoint)
        manifest = load_manifest(args.manifest, run_config.data.image_root)
        dataset = make_dataset(manifest, model.config, run_config.data)
        probabilities, _ = predict_dataset(model, dataset, train_config.batch_size, run_config.data.num_workers)

        with open(args.out, 'w', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(['path'] + ['p_{}'.format(c) for c in manifest.class_names]
                            + ['y_{}'.format(c) for c in manifest.class_names])
            for image_path, row in zip(manifest.paths, probabilities):
                writer.writerow([image_path] + ['{:.6f}'.format(p) for p in row]
                                + [int(p >= train_config.threshold) for p in row])
        log.info("Wrote {} predictions to {}".format(len(manifest), args.out))
        return 0
