import logging

import numpy as np
import torch
from matplotlib import image as mpimg
from scipy import ndimage

from ibca.error_handlers import DataException

log = logging.getLogger(__name__)


def read_image(image_path):
    """
    Decode to float [H, W, 3] in [0, 1]
    """
    try:
        pixels = np.asarray(mpimg.imread(image_path))
    except (OSError, ValueError, SyntaxError) as err:
        raise DataException('cannot decode image {}: {}'.format(image_path, err))
    return to_rgb_unit(pixels)


def to_rgb_unit(pixels):
    pixels = np.asarray(pixels)
    if pixels.dtype == np.uint8:
        pixels = pixels.astype(np.float32) / 255.0
    elif pixels.dtype == np.uint16:
        pixels = pixels.astype(np.float32) / 65535.0
    pixels = pixels.astype(np.float32)
    if pixels.ndim == 2:
        pixels = np.stack([pixels] * 3, axis=-1)
    if pixels.ndim != 3:
        raise DataException('expected an HxW or HxWxC image, got shape {}'.format(pixels.shape))
    if pixels.shape[-1] == 4:
        pixels = pixels[..., :3]
    elif pixels.shape[-1] == 1:
        pixels = np.repeat(pixels, 3, axis=-1)
    return np.clip(pixels, 0.0, 1.0)


def resize(pixels, image_size):
    height, width = pixels.shape[:2]
    if (height, width) == (image_size, image_size):
        return pixels
    factors = (image_size / height, image_size / width, 1.0)
    resized = ndimage.zoom(pixels, factors, order=1, grid_mode=True, mode='nearest')
    return resized[:image_size, :image_size]


def preprocess(image, image_size, channel_mean=(0.5, 0.5, 0.5), channel_std=(0.25, 0.25, 0.25)):
    """
    Path or array -> standardized float tensor [3, S, S]
    """
    pixels = read_image(image) if isinstance(image, str) else to_rgb_unit(image)
    pixels = resize(pixels, image_size)
    mean = np.asarray(channel_mean, dtype=np.float32)
    std = np.asarray(channel_std, dtype=np.float32)
    standardized = (pixels - mean) / std
    return torch.from_numpy(np.ascontiguousarray(standardized.transpose(2, 0, 1)))
