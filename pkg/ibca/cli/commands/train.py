import logging
from dataclasses import dataclass
from os import path, remove

from ibca.cli.base import Command, add_config_arguments, resolve_run_config, make_run_dir
from ibca.data.datasets import load_splits, make_dataset
from ibca.datamodel.serializers import write_config_snapshot, write_report
from ibca.model.network import IBCANetwork
from ibca.objective.checkpoint import save_checkpoint
from ibca.objective.trainer import MetricsLog, train, evaluate_model

log = logging.getLogger(__name__)


@dataclass
class FitOutcome:
    model: IBCANetwork
    test_report: object
    best_epoch: int
    run_dir: str


def build_datasets(run_config):
    manifests = load_splits(run_config.data)
    return manifests, tuple(make_dataset(m, run_config.model, run_config.data) for m in manifests)


def fit_variant(run_config, datasets, run_dir):
    """
    Train one variant into ``run_dir``: metrics.csv, last.pt, best.pt and the
    test report of the best-by-validation-mAP state
    """
    train_set, val_set, test_set = datasets
    metrics_path = path.join(run_dir, 'metrics.csv')
    if path.exists(metrics_path):
        remove(metrics_path)
    write_config_snapshot(run_config, path.join(run_dir, 'config.yaml'))

    model = IBCANetwork(run_config.model, run_config.train.variant)
    result = train(model, train_set, run_config.train, val_set=val_set,
                   num_workers=run_config.data.num_workers, epoch_callback=MetricsLog(metrics_path))
    save_checkpoint(model, run_config.train, path.join(run_dir, 'last.pt'))
    model.load_state_dict(result.best_state)
    save_checkpoint(model, run_config.train, path.join(run_dir, 'best.pt'))

    test_report = None
    if len(test_set):
        test_report = evaluate_model(model, test_set, run_config.train.threshold, run_config.train.batch_size,
                                     run_config.data.num_workers)
        write_report(test_report, path.join(run_dir, 'test_report.txt'), path.join(run_dir, 'test_report.csv'),
                     test_set.manifest.class_names, path.join(run_dir, 'test_report.yaml'))
    return FitOutcome(model=model, test_report=test_report, best_epoch=result.best_epoch, run_dir=run_dir)


class TrainCommand(Command):

    @classmethod
    def add_arguments(cls, parser):
        add_config_arguments(parser)

    def run(self, args):
        run_config = resolve_run_config(args)
        _, datasets = build_datasets(run_config)
        run_dir = make_run_dir(run_config)
        log.info("Training variant {} into {}".format(run_config.train.variant, run_dir))
        outcome = fit_variant(run_config, datasets, run_dir)
        if outcome.test_report is not None:
            summary = ' '.join('{}={:.2f}'.format(k, v) for k, v in outcome.test_report.summary().items())
            print('best epoch {}: {}'.format(outcome.best_epoch, summary))
        return 0
