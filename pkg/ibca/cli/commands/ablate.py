import csv
import logging
from dataclasses import replace
from os import path

import numpy as np

from ibca.cli.base import Command, add_config_arguments, resolve_run_config, make_run_dir, ensure_dir
from ibca.cli.commands.train import build_datasets, fit_variant
from ibca.datamodel.serializers import METRIC_COLUMNS
from ibca.model.network import Variant

log = logging.getLogger(__name__)

ABLATION_ORDER = (Variant.basic, Variant.single_vib, Variant.gmm_vib, Variant.full)


def variant_config(run_config, variant, seed):
    return replace(run_config,
                   model=replace(run_config.model, seed=seed),
                   train=replace(run_config.train, variant=variant.value, seed=seed))


def run_ablation(run_config, seeds, out_dir):
    """
    Train every variant for every seed on shared data; returns
    {seed: {variant: MetricsReport}}
    """
    _, datasets = build_datasets(run_config)
    results = {}
    for seed in seeds:
        results[seed] = {}
        for variant in ABLATION_ORDER:
            config = variant_config(run_config, variant, seed)
            run_dir = ensure_dir(path.join(out_dir, '{}-seed{}'.format(variant.value, seed)))
            log.info("Ablation seed {}: training {}".format(seed, variant.label))
            results[seed][variant] = fit_variant(config, datasets, run_dir).test_report
    return results


def format_table(rows):
    width = max(len(v.label) for v in ABLATION_ORDER)
    lines = ['{:<{w}} '.format('Methods', w=width) + ' '.join('{:>7}'.format(c) for c in METRIC_COLUMNS)]
    for label, values in rows:
        lines.append('{:<{w}} '.format(label, w=width) + ' '.join('{:>7.2f}'.format(v) for v in values))
    return '\n'.join(lines)


def mean_rows(results):
    rows = []
    for variant in ABLATION_ORDER:
        values = np.array([list(results[seed][variant].summary().values()) for seed in results])
        rows.append((variant.label, values.mean(axis=0).tolist()))
    return rows


def full_beats_basic(results):
    return sum(results[seed][Variant.full].map >= results[seed][Variant.basic].map for seed in results)


def write_ablation(results, out_dir):
    with open(path.join(out_dir, 'ablation.csv'), 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['seed', 'method'] + METRIC_COLUMNS)
        for seed in results:
            for variant in ABLATION_ORDER:
                summary = results[seed][variant].summary()
                writer.writerow([seed, variant.label] + ['{:.4f}'.format(v) for v in summary.values()])
    with open(path.join(out_dir, 'ablation_mean.csv'), 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['method'] + METRIC_COLUMNS)
        for label, values in mean_rows(results):
            writer.writerow([label] + ['{:.4f}'.format(v) for v in values])


class AblateCommand(Command):

    @classmethod
    def add_arguments(cls, parser):
        add_config_arguments(parser)
        parser.add_argument('--seeds', type=int, nargs='+', default=None,
                            help='seeds shared by all variants (default: train.seed)')

    def run(self, args):
        run_config = resolve_run_config(args)
        seeds = args.seeds or [run_config.train.seed]
        out_dir = make_run_dir(replace(run_config, output=replace(run_config.output, run_name='ablation')))
        results = run_ablation(run_config, seeds, out_dir)
        write_ablation(results, out_dir)
        for seed in seeds:
            print('seed {}'.format(seed))
            print(format_table([(v.label, list(results[seed][v].summary().values())) for v in ABLATION_ORDER]))
        if len(seeds) > 1:
            print('mean over {} seeds'.format(len(seeds)))
            print(format_table(mean_rows(results)))
        print('full >= basic on mAP in {}/{} seeds'.format(full_beats_basic(results), len(seeds)))
        return 0
