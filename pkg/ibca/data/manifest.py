"""
Manifests are delimited text tables with header
``path,<class_0>,...,<class_{C-1}>`` and one binary label cell per class.
"""
import csv
import io
import logging
import math
from dataclasses import dataclass, field
from os import path
from typing import List

import numpy as np

from ibca.error_handlers import ConfigurationException, DataException

log = logging.getLogger(__name__)


@dataclass
class Manifest:
    class_names: List[str]
    paths: List[str]
    labels: np.ndarray  # [n, N_c] uint8
    root: str = field(default='')

    def __len__(self):
        return len(self.paths)

    @property
    def n_classes(self):
        return len(self.class_names)

    def resolve(self, index):
        image_path = self.paths[index]
        if path.isabs(image_path) or not self.root:
            return image_path
        return path.join(self.root, image_path)

    def subset(self, indices):
        indices = list(indices)
        return Manifest(class_names=list(self.class_names),
                        paths=[self.paths[i] for i in indices],
                        labels=self.labels[indices],
                        root=self.root)


def load_manifest(manifest_path, root=None, allow_empty=False):
    """
    Image paths resolve against ``root``, defaulting to the manifest's directory.
    A header-only file is an error unless ``allow_empty``.
    """
    if not path.exists(manifest_path):
        raise DataException('manifest {} does not exist'.format(manifest_path))
    rows = list(csv.reader(io.StringIO(_read_text(manifest_path), newline='')))
    if not rows or len(rows[0]) < 2 or rows[0][0].strip() != 'path':
        raise DataException('{}: header must be "path,<class_0>,...", got {}'.format(
            manifest_path, rows[0] if rows else 'an empty file'))
    class_names = [name.strip() for name in rows[0][1:]]
    paths, labels = [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(class_names) + 1:
            raise DataException('{} line {}: expected {} cells, got {}'.format(
                manifest_path, line_no, len(class_names) + 1, len(row)))
        vector = []
        for column, cell in enumerate(row[1:], start=2):
            if cell.strip() not in ('0', '1'):
                raise DataException('{} line {}, column {} ({}): label "{}" is not 0 or 1'.format(
                    manifest_path, line_no, column, class_names[column - 2], cell))
            vector.append(int(cell))
        paths.append(row[0].strip())
        labels.append(vector)
    if not paths and not allow_empty:
        raise DataException('{}: no samples'.format(manifest_path))
    log.debug("Loaded {} rows from {}".format(len(paths), manifest_path))
    return Manifest(class_names=class_names, paths=paths,
                    labels=np.asarray(labels, dtype=np.uint8).reshape(len(paths), len(class_names)),
                    root=root if root is not None else path.dirname(path.abspath(manifest_path)))


def _read_text(manifest_path):
    with open(manifest_path, 'rb') as fh:
        raw = fh.read()
    try:
        return raw.decode('utf-8')
    except UnicodeDecodeError as e:
        raise DataException('{} line {}: not valid UTF-8 (byte 0x{:02x})'.format(
            manifest_path, raw.count(b'\n', 0, e.start) + 1, raw[e.start]))


def write_manifest(manifest, manifest_path):
    with open(manifest_path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['path'] + list(manifest.class_names))
        for image_path, vector in zip(manifest.paths, manifest.labels):
            writer.writerow([image_path] + [int(v) for v in vector])


def split_sizes(n, ratios):
    # tolerance keeps 0.29 * 100 from flooring to 28
    n_train = math.floor(ratios[0] * n + 1e-9)
    n_val = math.floor(ratios[1] * n + 1e-9)
    return n_train, n_val, n - n_train - n_val


def split(manifest, ratios=(0.8, 0.1, 0.1), seed=0):
    """
    Seeded shuffle into train/val/test of sizes floor(r0 n), floor(r1 n), rest
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ConfigurationException('split ratios {} must be three non-negative values summing to 1'.format(
            list(ratios)))
    n_train, n_val, _ = split_sizes(len(manifest), ratios)
    order = np.random.default_rng(seed).permutation(len(manifest))
    return (manifest.subset(order[:n_train]),
            manifest.subset(order[n_train:n_train + n_val]),
            manifest.subset(order[n_train + n_val:]))
