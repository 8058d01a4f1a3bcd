"""
Multi-label metrics: mAP, class-wise recall/F1 (CR, CF1) and overall
recall/F1 (OR, OF1).

AP is the mean of precision at the rank of every positive, scores sorted in
descending order with ties broken by sample index (no interpolation). Classes
without positives are left out of mAP, CR and CF1 and listed in the report.
Undefined precision, recall or F1 count as 0.
"""
import logging

import numpy as np

from ibca.datamodel.reports import MetricsReport
from ibca.error_handlers import DataException, ShapeException

log = logging.getLogger(__name__)


def average_precision(scores, labels):
    """
    Returns None when ``labels`` has no positives
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if not labels.any():
        return None
    order = np.argsort(-scores, kind='stable')
    hits = labels[order]
    ranks = np.arange(1, len(hits) + 1)
    precision_at_hit = np.cumsum(hits)[hits] / ranks[hits]
    return float(precision_at_hit.mean())


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros(np.broadcast(num, den).shape), where=den > 0)


def _f1(precision, recall):
    return _safe_div(2 * precision * recall, precision + recall)


def evaluate(probabilities, labels, threshold=0.5):
    probabilities = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if probabilities.size == 0 or labels.size == 0:
        raise DataException('cannot evaluate an empty prediction set')
    if probabilities.shape != labels.shape or probabilities.ndim != 2:
        raise ShapeException('probabilities {} and labels {} must share an [n, N_c] shape'.format(
            probabilities.shape, labels.shape))
    predicted = probabilities >= threshold

    tp = (predicted & labels).sum(axis=0).astype(np.float64)
    fp = (predicted & ~labels).sum(axis=0).astype(np.float64)
    fn = (~predicted & labels).sum(axis=0).astype(np.float64)
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _f1(precision, recall)

    per_class_ap = [average_precision(probabilities[:, k], labels[:, k]) for k in range(labels.shape[1])]
    active = np.array([ap is not None for ap in per_class_ap])
    skipped = [int(k) for k in np.flatnonzero(~active)]
    if skipped:
        log.info('classes without positives left out of class-wise averages: {}'.format(skipped))

    micro_precision = _safe_div(tp.sum(), tp.sum() + fp.sum())
    micro_recall = _safe_div(tp.sum(), tp.sum() + fn.sum())

    def class_mean(values):
        return float(values[active].mean()) * 100 if active.any() else 0.0

    return MetricsReport(
        map=float(np.mean([ap for ap in per_class_ap if ap is not None])) * 100 if active.any() else 0.0,
        cr=class_mean(recall),
        cf1=class_mean(f1),
        or_=float(micro_recall) * 100,
        of1=float(_f1(micro_precision, micro_recall)) * 100,
        threshold=threshold,
        per_class_ap=[None if ap is None else ap * 100 for ap in per_class_ap],
        per_class_precision=[float(v) * 100 for v in precision],
        per_class_recall=[float(v) * 100 for v in recall],
        per_class_f1=[float(v) * 100 for v in f1],
        skipped_classes=skipped,
    )
