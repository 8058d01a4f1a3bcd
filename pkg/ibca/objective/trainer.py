"""
Single-writer training loop (Adam, constant rate unless cosine_decay), model
selection by validation mAP, and the fused two-path prediction.

metrics.csv header::

    epoch,step,total_loss,vib_mlsm,kl,l_t,l_s,learning_rate,val_CR,val_CF1,val_OR,val_OF1,val_mAP
"""
import copy
import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from os import path
from typing import List, Optional

import numpy as np
import torch

from ibca.data.datasets import make_loader
from ibca.datamodel.reports import StepReport, MetricsReport
from ibca.datamodel.serializers import METRIC_COLUMNS, step_report_marshmallow
from ibca.error_handlers import NumericalException
from ibca.evaluation.metrics import evaluate
from ibca.model.gm_vib import AttentionKind
from ibca.model.network import Variant
from ibca.objective.losses import compute_components, total_loss

log = logging.getLogger(__name__)

METRICS_HEADER = ['epoch', 'step', 'total_loss', 'vib_mlsm', 'kl', 'l_t', 'l_s', 'learning_rate'] + \
    ['val_{}'.format(c) for c in METRIC_COLUMNS]
LOSS_COLUMNS = METRICS_HEADER[2:7]


@dataclass
class TrainResult:
    best_state: dict
    last_state: dict
    best_epoch: int
    history: List[StepReport] = field(default_factory=list)
    validation: List[Optional[MetricsReport]] = field(default_factory=list)


class MetricsLog:
    """
    Append-only per-epoch CSV
    """

    def __init__(self, csv_path):
        self.csv_path = csv_path
        if not path.exists(csv_path):
            with open(csv_path, 'w', newline='') as fh:
                csv.writer(fh, lineterminator='\n').writerow(METRICS_HEADER)

    def __call__(self, report, metrics=None):
        values = step_report_marshmallow.dump(report)
        row = [values['epoch'], values['step']] + ['{:.8f}'.format(values[name]) for name in LOSS_COLUMNS]
        row.append('{:.3e}'.format(values['learning_rate']))
        if metrics is None:
            row += [''] * len(METRIC_COLUMNS)
        else:
            row += ['{:.4f}'.format(v) for v in metrics.summary().values()]
        with open(self.csv_path, 'a', newline='') as fh:
            csv.writer(fh, lineterminator='\n').writerow(row)


def fuse_probabilities(patch_probabilities, token_probabilities):
    return 0.5 * (patch_probabilities + token_probabilities)


@torch.no_grad()
def predict(model, images):
    """
    Mean of the patch-path and class-token-path sigmoid scores, deterministic
    attention
    """
    model.eval()
    output = model(images, kind=AttentionKind.deterministic)
    return fuse_probabilities(torch.sigmoid(output.patch_logits), torch.sigmoid(output.token_logits))


def predict_dataset(model, dataset, batch_size=64, num_workers=0):
    probabilities, labels = [], []
    for images, targets in make_loader(dataset, batch_size, num_workers=num_workers):
        probabilities.append(predict(model, images).cpu().numpy())
        labels.append(targets.cpu().numpy())
    return np.concatenate(probabilities), np.concatenate(labels)


def evaluate_model(model, dataset, threshold=0.5, batch_size=64, num_workers=0):
    probabilities, labels = predict_dataset(model, dataset, batch_size, num_workers)
    return evaluate(probabilities, labels, threshold)


def _epoch_report(epoch, step, sums, n_batches, learning_rate):
    def mean(name):
        return sums[name] / n_batches if n_batches else 0.0
    return StepReport(epoch=epoch, step=step, total_loss=mean('total_loss'), vib_mlsm=mean('vib_mlsm'),
                      kl=mean('kl'), l_t=mean('l_t'), l_s=mean('l_s'), learning_rate=learning_rate)


def train_step(model, optimizer, images, targets, config, variant, rng):
    output = model(images, kind=AttentionKind.sampled, rng=rng, alpha0=config.alpha0)
    components = compute_components(output, targets, config, variant)
    loss = total_loss(components, config, variant)
    if not torch.isfinite(loss):
        raise NumericalException('non-finite loss {}'.format(float(loss)), debug=components.as_floats())
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    values = components.as_floats()
    values['total_loss'] = float(loss)
    return values


def train(model, train_set, config, val_set=None, rng=None, num_workers=0, epoch_callback=None):
    """
    Returns a TrainResult; ``best_state`` is the state with the highest
    validation mAP (the last state when no validation set is given)
    """
    variant = Variant(config.variant)
    if rng is None:
        rng = torch.Generator().manual_seed(config.seed + 1)
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=config.learning_rate)
    scheduler = None
    if config.cosine_decay:
        scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=max(1, config.epochs))
    loader = make_loader(train_set, config.batch_size, shuffle=True, seed=config.seed, num_workers=num_workers)

    result = TrainResult(best_state=copy.deepcopy(model.state_dict()), last_state=None, best_epoch=0)
    best_map = -math.inf
    step = 0
    for epoch in range(1, config.epochs + 1):
        model.train()
        learning_rate = optimizer.param_groups[0]['lr']
        sums, n_batches = defaultdict(float), 0
        for images, targets in loader:
            values = train_step(model, optimizer, images, targets, config, variant, rng)
            for name, value in values.items():
                sums[name] += value or 0.0
            n_batches += 1
            step += 1
        if scheduler is not None:
            scheduler.step()
        report = _epoch_report(epoch, step, sums, n_batches, learning_rate)
        metrics = None
        if val_set is not None and len(val_set):
            metrics = evaluate_model(model, val_set, config.threshold, config.batch_size, num_workers)
        result.history.append(report)
        result.validation.append(metrics)
        current = metrics.map if metrics is not None else epoch
        if current > best_map:
            best_map, result.best_epoch = current, epoch
            result.best_state = copy.deepcopy(model.state_dict())
        log.info("epoch {}/{} loss={:.4f} l_vib_mlsm={:.4f} kl={:.2f} l_t={:.4f} l_s={:.4f}{}".format(
            epoch, config.epochs, report.total_loss, report.vib_mlsm, report.kl, report.l_t, report.l_s,
            '' if metrics is None else ' val_mAP={:.2f}'.format(metrics.map)))
        if epoch_callback is not None:
            epoch_callback(report, metrics)
    result.last_state = copy.deepcopy(model.state_dict())
    return result
