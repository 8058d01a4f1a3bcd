from dataclasses import dataclass, field
from typing import List, Optional


@dataclass
class StepReport:
    """
    Mean loss components over one training epoch
    """
    epoch: int
    step: int
    total_loss: float
    vib_mlsm: float
    kl: float
    l_t: float
    l_s: float
    learning_rate: float


@dataclass
class MetricsReport:
    """
    Multi-label evaluation of one pass; every value is a percentage
    """
    map: float
    cr: float
    cf1: float
    or_: float
    of1: float
    threshold: float
    per_class_ap: List[Optional[float]] = field(default_factory=list)
    per_class_precision: List[float] = field(default_factory=list)
    per_class_recall: List[float] = field(default_factory=list)
    per_class_f1: List[float] = field(default_factory=list)
    skipped_classes: List[int] = field(default_factory=list)

    def summary(self):
        """CR, CF1, OR, OF1, mAP"""
        return {'CR': self.cr, 'CF1': self.cf1, 'OR': self.or_, 'OF1': self.of1, 'mAP': self.map}
