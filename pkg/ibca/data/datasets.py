import logging
from collections import OrderedDict

import torch
from torch.utils.data import Dataset, DataLoader

from ibca.data.manifest import load_manifest, split
from ibca.data.preprocess import preprocess
from ibca.error_handlers import ConfigurationException

log = logging.getLogger(__name__)


class ManifestDataset(Dataset):
    """
    (image tensor [3, S, S], float label vector [N_c]) pairs. Up to
    ``cache_size`` decoded images stay in memory, least recently used first out.
    """

    def __init__(self, manifest, image_size, channel_mean, channel_std, cache_size=0):
        self.manifest = manifest
        self.image_size = image_size
        self.channel_mean = tuple(channel_mean)
        self.channel_std = tuple(channel_std)
        self.labels = torch.as_tensor(manifest.labels, dtype=torch.float32)
        self.cache_size = cache_size
        self._cache = OrderedDict()

    def __len__(self):
        return len(self.manifest)

    def __getitem__(self, index):
        if index in self._cache:
            self._cache.move_to_end(index)
            return self._cache[index], self.labels[index]
        image = preprocess(self.manifest.resolve(index), self.image_size, self.channel_mean, self.channel_std)
        if self.cache_size > 0:
            self._cache[index] = image
            if len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return image, self.labels[index]


class TensorPairDataset(Dataset):

    def __init__(self, images, labels):
        self.images = torch.as_tensor(images, dtype=torch.float32)
        self.labels = torch.as_tensor(labels, dtype=torch.float32)

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, index):
        return self.images[index], self.labels[index]


def load_splits(data_config, image_root=None):
    """
    Manifests for (train, val, test): explicit per-split files when given,
    otherwise a seeded split of ``data.manifest``. Explicit val and test files
    may be header-only.
    """
    root = image_root or data_config.image_root
    explicit = (data_config.train_manifest, data_config.val_manifest, data_config.test_manifest)
    if all(explicit):
        return (load_manifest(explicit[0], root),
                load_manifest(explicit[1], root, allow_empty=True),
                load_manifest(explicit[2], root, allow_empty=True))
    if data_config.manifest:
        return split(load_manifest(data_config.manifest, root), data_config.split_ratios, data_config.split_seed)
    raise ConfigurationException('data: set either manifest or train_manifest, val_manifest and test_manifest')


def select_split(manifest, split_name, data_config):
    """
    ``all`` keeps the manifest; train/val/test re-derive the seeded split
    """
    if split_name == 'all':
        return manifest
    names = ('train', 'val', 'test')
    if split_name not in names:
        raise ConfigurationException('split must be one of all, {}'.format(', '.join(names)))
    return split(manifest, data_config.split_ratios, data_config.split_seed)[names.index(split_name)]


def make_dataset(manifest, model_config, data_config):
    if manifest.n_classes != model_config.n_classes:
        raise ConfigurationException('manifest has {} classes but the model is configured for {}'.format(
            manifest.n_classes, model_config.n_classes))
    return ManifestDataset(manifest, model_config.image_size, data_config.channel_mean, data_config.channel_std,
                           cache_size=data_config.cache_size)


def make_loader(dataset, batch_size, shuffle=False, seed=0, num_workers=0):
    generator = torch.Generator()
    generator.manual_seed(seed)
    return DataLoader(dataset, batch_size=batch_size, shuffle=shuffle, generator=generator,
                      num_workers=num_workers, prefetch_factor=2 if num_workers else None)
