"""
Attention and feature export for figure-making and external embedding tools.
"""
import csv
import logging
from os import path, makedirs

import numpy as np
import torch
from matplotlib import image as mpimg

from ibca.data.datasets import make_loader
from ibca.datamodel.tensor_io import write_raw
from ibca.model.gm_vib import AttentionKind

log = logging.getLogger(__name__)


def heatmap(weights, grid_size, image_size):
    """
    Flat [N_p^2] map -> uint8 [S, S]: per-map min-max scaling to [0, 255],
    nearest-neighbour upsampling. A constant map becomes all zeros.
    """
    grid = np.asarray(weights, dtype=np.float64).reshape(grid_size, grid_size)
    low, high = grid.min(), grid.max()
    scaled = np.zeros_like(grid) if high <= low else (grid - low) / (high - low)
    pixels = np.rint(scaled * 255).astype(np.uint8)
    factor = image_size // grid_size
    return np.kron(pixels, np.ones((factor, factor), dtype=np.uint8))


def save_heatmap(pixels, target):
    mpimg.imsave(target, pixels, cmap='gray', vmin=0, vmax=255)


@torch.no_grad()
def attention_maps(model, images):
    """
    Deterministic class attention [B, N_c, P], per-head class attention
    [B, H, N_c, P] and intervention scores [B, N_c]
    """
    model.eval()
    output = model(images, kind=AttentionKind.deterministic)
    return (output.a_hat.weights.cpu().numpy(),
            output.head_attn.a_l.cpu().numpy(),
            model.intervention(output).cpu().numpy())


def export_attention(model, dataset, out_dir, batch_size=32):
    """
    One subdirectory per image: class_attention.raw, head_attention.raw,
    intervention_scores.raw, class_<k>.png and class_<k>_head_<l>.png
    """
    config = model.config
    names = dataset.manifest.class_names
    written = []
    index = 0
    for images, _ in make_loader(dataset, batch_size):
        class_attn, head_attn, scores = attention_maps(model, images)
        for b in range(len(images)):
            stem = path.splitext(path.basename(dataset.manifest.paths[index]))[0]
            sample_dir = path.join(out_dir, '{:06d}_{}'.format(index, stem))
            makedirs(sample_dir, exist_ok=True)
            write_raw(path.join(sample_dir, 'class_attention.raw'), class_attn[b].astype(np.float32))
            write_raw(path.join(sample_dir, 'head_attention.raw'), head_attn[b].astype(np.float32))
            write_raw(path.join(sample_dir, 'intervention_scores.raw'), scores[b].astype(np.float32))
            for k in range(config.n_classes):
                save_heatmap(heatmap(class_attn[b, k], config.grid_size, config.image_size),
                             path.join(sample_dir, 'class_{}.png'.format(names[k])))
                for h in range(config.n_heads):
                    save_heatmap(heatmap(head_attn[b, h, k], config.grid_size, config.image_size),
                                 path.join(sample_dir, 'class_{}_head_{}.png'.format(names[k], h)))
            written.append(sample_dir)
            index += 1
    log.info("Exported attention for {} images to {}".format(index, out_dir))
    return written


@torch.no_grad()
def dump_features(model, dataset, target, batch_size=32):
    """
    One row per (sample, active class): Z_p[k] as f_0..f_{D-1}, then the class
    """
    model.eval()
    names = dataset.manifest.class_names
    D = model.config.embed_dim
    n_rows = 0
    with open(target, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['f_{}'.format(d) for d in range(D)] + ['class'])
        for images, labels in make_loader(dataset, batch_size):
            z_p = model(images, kind=AttentionKind.deterministic).z_p.z_p.cpu().numpy()
            for b, k in zip(*np.nonzero(labels.numpy())):
                writer.writerow(['{:.8g}'.format(v) for v in z_p[b, k]] + [names[k]])
                n_rows += 1
    log.info("Wrote {} feature rows to {}".format(n_rows, target))
    return n_rows
