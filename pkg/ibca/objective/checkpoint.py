"""
Checkpoint archive: ``torch.save`` of {model_config, train_config, state_dict}.

A sibling ``<checkpoint>.manifest.txt`` lists ``name<TAB>shape`` for every
tensor so other implementations can map the archive without torch.
"""
import logging
from os import path

import torch

from ibca.datamodel.serializers import model_config_marshmallow, train_config_marshmallow
from ibca.error_handlers import DataException
from ibca.model.network import IBCANetwork

log = logging.getLogger(__name__)


def parameter_manifest(model):
    return [(name, tuple(tensor.shape)) for name, tensor in model.state_dict().items()]


def save_checkpoint(model, train_config, checkpoint_path):
    torch.save({
        'model_config': model_config_marshmallow.dump(model.config),
        'train_config': train_config_marshmallow.dump(train_config),
        'state_dict': model.state_dict(),
    }, checkpoint_path)
    with open(checkpoint_path + '.manifest.txt', 'w') as fh:
        for name, shape in parameter_manifest(model):
            fh.write('{}\t{}\n'.format(name, ','.join(str(s) for s in shape)))
    log.debug("Wrote checkpoint {}".format(checkpoint_path))


def load_checkpoint(checkpoint_path):
    """
    Returns (model in eval mode, TrainConfig)
    """
    if not path.exists(checkpoint_path):
        raise DataException('checkpoint {} does not exist'.format(checkpoint_path))
    archive = torch.load(checkpoint_path, map_location='cpu', weights_only=False)
    model_config = model_config_marshmallow.load(archive['model_config'])
    train_config = train_config_marshmallow.load(archive['train_config'])
    model = IBCANetwork(model_config, train_config.variant)
    model.load_state_dict(archive['state_dict'])
    model.eval()
    log.debug("Loaded checkpoint {} ({} variant)".format(checkpoint_path, train_config.variant))
    return model, train_config
