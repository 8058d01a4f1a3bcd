"""
Synthetic confounded multi-label images.

Class k is a localized pattern (disk, bar, ring, cross; later classes reuse the
shapes at a smaller scale) stamped at a random position when its label is on.
The background texture is the confounder: with probability rho it copies the
label of class 0, otherwise it is drawn independently with the same marginal,
so corr(background, label_0) = rho. rho_train applies to the train and val
splits, rho_test to the test split. Every stamp position is recorded.
"""
import csv
import logging
from dataclasses import dataclass
from os import path, makedirs
from typing import List, Tuple

import numpy as np
import yaml
from matplotlib import image as mpimg

from ibca.data.manifest import Manifest, split_sizes, write_manifest
from ibca.datamodel.serializers import synthetic_spec_marshmallow
from ibca.error_handlers import ConfigurationException

log = logging.getLogger(__name__)

SHAPES = ('disk', 'bar', 'ring', 'cross')
SPLITS = ('train', 'val', 'test')
BACKGROUND_LEVEL = 0.3
BACKGROUND_AMPLITUDE = 0.15
PATTERN_LEVEL = 1.0
MIN_RADIUS = 2


@dataclass
class Stamp:
    class_index: int
    row: int
    col: int


@dataclass
class SyntheticDataset:
    images: np.ndarray        # [n, 3, S, S] float32 in [0, 1]
    labels: np.ndarray        # [n, N_c] uint8
    background: np.ndarray    # [n] uint8 texture identity
    splits: List[str]
    stamps: List[List[Stamp]]
    class_names: List[str]

    def __len__(self):
        return len(self.labels)

    def indices(self, split_name):
        return [i for i, s in enumerate(self.splits) if s == split_name]

    def metadata_rows(self):
        rows = []
        for i, stamps in enumerate(self.stamps):
            base = {'index': i, 'split': self.splits[i], 'background': int(self.background[i])}
            if not stamps:
                rows.append(dict(base, class_index=-1, row=-1, col=-1))
            for stamp in stamps:
                rows.append(dict(base, class_index=stamp.class_index, row=stamp.row, col=stamp.col))
        return rows


def class_names(n_classes):
    return [SHAPES[k % len(SHAPES)] + ('' if k < len(SHAPES) else '_s{}'.format(k // len(SHAPES)))
            for k in range(n_classes)]


def pattern_radius(spec, class_index):
    return max(MIN_RADIUS, spec.pattern_radius - class_index // len(SHAPES))


def pattern_mask(shape, radius):
    """Boolean (2r+1, 2r+1) mask, symmetric about its center"""
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    d2 = yy ** 2 + xx ** 2
    if shape == 'disk':
        return d2 <= radius ** 2
    if shape == 'ring':
        return (d2 <= radius ** 2) & (d2 >= (radius - 1.5) ** 2)
    if shape == 'bar':
        return np.abs(yy) <= max(1, radius // 3)
    if shape == 'cross':
        width = radius // 4
        return (np.abs(yy) <= width) | (np.abs(xx) <= width)
    raise ConfigurationException('unknown pattern {}'.format(shape))


def background_texture(identity, image_size):
    yy, xx = np.mgrid[0:image_size, 0:image_size]
    if identity:
        wave = ((yy // 2 + xx // 2) % 2).astype(np.float32)  # checkerboard
    else:
        wave = ((yy // 2) % 2).astype(np.float32)  # horizontal stripes
    return BACKGROUND_LEVEL + BACKGROUND_AMPLITUDE * (2 * wave - 1)


def draw_labels(rng, spec):
    """
    With probability ``cooccurrence`` all classes share one uniform draw, which
    couples them while keeping every marginal at ``label_rate``
    """
    if rng.random() < spec.cooccurrence:
        u = np.full(spec.n_classes, rng.random())
    else:
        u = rng.random(spec.n_classes)
    return (u < spec.label_rate).astype(np.uint8)


def assign_splits(spec):
    n_train, n_val, _ = split_sizes(spec.n_samples, spec.split_ratios)
    order = np.random.default_rng(spec.seed).permutation(spec.n_samples)
    splits = ['test'] * spec.n_samples
    for i in order[:n_train]:
        splits[i] = 'train'
    for i in order[n_train:n_train + n_val]:
        splits[i] = 'val'
    return splits


def render_sample(rng, spec, labels, background, shapes):
    S = spec.image_size
    canvas = background_texture(background, S)
    stamps = []
    for k in np.flatnonzero(labels):
        mask = shapes[k]
        r = mask.shape[0] // 2
        row = int(rng.integers(r, S - r))
        col = int(rng.integers(r, S - r))
        window = canvas[row - r:row + r + 1, col - r:col + r + 1]
        window[mask] = PATTERN_LEVEL
        stamps.append(Stamp(class_index=int(k), row=row, col=col))
    if spec.noise > 0:
        canvas = canvas + rng.normal(0.0, spec.noise, size=canvas.shape)
    canvas = np.clip(canvas, 0.0, 1.0).astype(np.float32)
    return np.stack([canvas] * 3), stamps


def generate_synthetic(spec):
    shapes = []
    for k in range(spec.n_classes):
        radius = pattern_radius(spec, k)
        if 2 * radius + 1 > spec.image_size:
            raise ConfigurationException('image_size {} is too small for a pattern of radius {}'.format(
                spec.image_size, radius))
        shapes.append(pattern_mask(SHAPES[k % len(SHAPES)], radius))

    splits = assign_splits(spec)
    images = np.empty((spec.n_samples, 3, spec.image_size, spec.image_size), dtype=np.float32)
    labels = np.empty((spec.n_samples, spec.n_classes), dtype=np.uint8)
    background = np.empty(spec.n_samples, dtype=np.uint8)
    stamps = []
    for i in range(spec.n_samples):
        rng = np.random.default_rng([spec.seed, i])
        labels[i] = draw_labels(rng, spec)
        rho = spec.rho_test if splits[i] == 'test' else spec.rho_train
        if rng.random() < rho:
            background[i] = labels[i, 0]
        else:
            background[i] = rng.random() < spec.label_rate
        images[i], sample_stamps = render_sample(rng, spec, labels[i], background[i], shapes)
        stamps.append(sample_stamps)
    log.info("Generated {} synthetic images ({} classes, rho_train={}, rho_test={})".format(
        spec.n_samples, spec.n_classes, spec.rho_train, spec.rho_test))
    return SyntheticDataset(images=images, labels=labels, background=background, splits=splits,
                            stamps=stamps, class_names=class_names(spec.n_classes))


def write_synthetic(dataset, spec, out_dir) -> Tuple[str, ...]:
    """
    Image directory + manifest.csv, {train,val,test}.csv, metadata.csv, spec.yaml
    """
    image_dir = path.join(out_dir, 'images')
    makedirs(image_dir, exist_ok=True)
    paths = []
    for i in range(len(dataset)):
        rel = 'images/{:06d}.png'.format(i)
        mpimg.imsave(path.join(out_dir, rel), dataset.images[i].transpose(1, 2, 0))
        paths.append(rel)

    full = Manifest(class_names=dataset.class_names, paths=paths, labels=dataset.labels, root=out_dir)
    written = [path.join(out_dir, 'manifest.csv')]
    write_manifest(full, written[0])
    for split_name in SPLITS:
        target = path.join(out_dir, '{}.csv'.format(split_name))
        write_manifest(full.subset(dataset.indices(split_name)), target)
        written.append(target)

    metadata_path = path.join(out_dir, 'metadata.csv')
    with open(metadata_path, 'w', newline='') as fh:
        writer = csv.DictWriter(fh, fieldnames=['index', 'split', 'background', 'class_index', 'row', 'col'],
                                lineterminator='\n')
        writer.writeheader()
        writer.writerows(dataset.metadata_rows())
    written.append(metadata_path)

    spec_path = path.join(out_dir, 'spec.yaml')
    with open(spec_path, 'w') as fh:
        yaml.safe_dump(synthetic_spec_marshmallow.dump(spec), fh, sort_keys=False)
    written.append(spec_path)
    return tuple(written)
