import csv

import marshmallow_dataclass
import yaml

from ibca.datamodel.config import ModelConfig, TrainConfig, RunConfig, SyntheticSpec
from ibca.datamodel.reports import StepReport, MetricsReport

model_config_marshmallow = marshmallow_dataclass.class_schema(ModelConfig)()
train_config_marshmallow = marshmallow_dataclass.class_schema(TrainConfig)()
run_config_marshmallow = marshmallow_dataclass.class_schema(RunConfig)()
synthetic_spec_marshmallow = marshmallow_dataclass.class_schema(SyntheticSpec)()
step_report_marshmallow = marshmallow_dataclass.class_schema(StepReport)()
metrics_report_marshmallow = marshmallow_dataclass.class_schema(MetricsReport)()

METRIC_COLUMNS = ['CR', 'CF1', 'OR', 'OF1', 'mAP']


def write_config_snapshot(run_config, path):
    with open(path, 'w') as fh:
        yaml.safe_dump(run_config_marshmallow.dump(run_config), fh, sort_keys=False)


def format_report(report, class_names=None):
    """
    Structured text: one metric per line, then the per-class table
    """
    lines = ['{}: {:.2f}'.format(name, value) for name, value in report.summary().items()]
    lines.append('threshold: {}'.format(report.threshold))
    if report.skipped_classes:
        lines.append('skipped (no positives): {}'.format(
            ', '.join(_class_name(k, class_names) for k in report.skipped_classes)))
    for k in range(len(report.per_class_f1)):
        ap = report.per_class_ap[k]
        lines.append('{}: AP={} P={:.2f} R={:.2f} F1={:.2f}'.format(
            _class_name(k, class_names),
            'n/a' if ap is None else '{:.2f}'.format(ap),
            report.per_class_precision[k], report.per_class_recall[k], report.per_class_f1[k]))
    return '\n'.join(lines) + '\n'


def write_report(report, text_path, csv_path, class_names=None, yaml_path=None):
    """
    Text summary, one-row CSV of the headline metrics and, with ``yaml_path``,
    the full report as YAML
    """
    with open(text_path, 'w') as fh:
        fh.write(format_report(report, class_names))
    with open(csv_path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        writer.writerow(['{:.4f}'.format(v) for v in report.summary().values()])
    if yaml_path:
        with open(yaml_path, 'w') as fh:
            yaml.safe_dump(metrics_report_marshmallow.dump(report), fh, sort_keys=False)


def write_per_class_table(report, path, class_names=None):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['class', 'ap', 'precision', 'recall', 'f1'])
        for k in range(len(report.per_class_f1)):
            ap = report.per_class_ap[k]
            writer.writerow([
                _class_name(k, class_names),
                '' if ap is None else '{:.4f}'.format(ap),
                '{:.4f}'.format(report.per_class_precision[k]),
                '{:.4f}'.format(report.per_class_recall[k]),
                '{:.4f}'.format(report.per_class_f1[k]),
            ])


def _class_name(k, class_names):
    return class_names[k] if class_names else 'class_{}'.format(k)
