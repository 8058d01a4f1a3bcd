import logging

from marshmallow import ValidationError

from ibca.cli.base import Command, ensure_dir
from ibca.data.synthetic import generate_synthetic, write_synthetic
from ibca.datamodel.serializers import synthetic_spec_marshmallow
from ibca.error_handlers import ConfigurationException

log = logging.getLogger(__name__)


class SynthCommand(Command):

    @classmethod
    def add_arguments(cls, parser):
        parser.add_argument('--out', default='data/synthetic', help='dataset directory')
        parser.add_argument('--n-classes', type=int, default=4)
        parser.add_argument('--image-size', type=int, default=32)
        parser.add_argument('--n-samples', type=int, default=2000)
        parser.add_argument('--rho-train', type=float, default=0.9,
                            help='probability that the background copies the class-0 label (train/val)')
        parser.add_argument('--rho-test', type=float, default=0.0, help='same, for the test split')
        parser.add_argument('--label-rate', type=float, default=0.35, help='marginal frequency of every label')
        parser.add_argument('--cooccurrence', type=float, default=0.2,
                            help='probability that all labels share one draw')
        parser.add_argument('--noise', type=float, default=0.05, help='per-pixel Gaussian noise std')
        parser.add_argument('--pattern-radius', type=int, default=4)
        parser.add_argument('--seed', type=int, default=0)

    def run(self, args):
        raw = {
            'n_classes': args.n_classes,
            'image_size': args.image_size,
            'n_samples': args.n_samples,
            'rho_train': args.rho_train,
            'rho_test': args.rho_test,
            'label_rate': args.label_rate,
            'cooccurrence': args.cooccurrence,
            'noise': args.noise,
            'pattern_radius': args.pattern_radius,
            'seed': args.seed,
        }
        try:
            spec = synthetic_spec_marshmallow.load(raw)
        except ValidationError as err:
            raise ConfigurationException('invalid synthetic spec: {}'.format(err.messages), debug=err.messages)
        written = write_synthetic(generate_synthetic(spec), spec, ensure_dir(args.out))
        for target in written:
            print(target)
        return 0
