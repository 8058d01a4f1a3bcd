"""
Multi-class-token vision transformer.

N_c learned class tokens are prepended to the N_p^2 patch tokens (class tokens
first). The encoder returns the final token embeddings split into class and
patch tokens, and the per-head post-softmax attention of the last block.
"""
import logging
import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ibca.error_handlers import ConfigurationException, NumericalException

log = logging.getLogger(__name__)


@dataclass
class TokenState:
    class_tokens: torch.Tensor  # F_t [batch, N_c, D]
    patch_tokens: torch.Tensor  # F_p [batch, N_p^2, D]


@dataclass
class AttentionStack:
    attn: torch.Tensor  # [batch, H, T, T], rows sum to 1


class PatchEmbedding(nn.Module):
    """
    Non-overlapping patchify + linear projection, learned positional
    encodings on the patch tokens only
    """

    def __init__(self, config):
        super().__init__()
        self.config = config
        self.projection = nn.Conv2d(config.in_channels, config.embed_dim,
                                    kernel_size=config.patch_size, stride=config.patch_size)
        self.pos_embed = nn.Parameter(torch.zeros(1, config.n_patches, config.embed_dim))
        nn.init.trunc_normal_(self.pos_embed, std=0.02)

    def forward(self, images):
        expected = (self.config.in_channels, self.config.image_size, self.config.image_size)
        if images.dim() != 4 or tuple(images.shape[1:]) != expected:
            raise ConfigurationException(
                'images of shape {} do not match [batch, {}, {}, {}]'.format(tuple(images.shape), *expected))
        x = self.projection(images).flatten(2).transpose(1, 2)
        return x + self.pos_embed


class Attention(nn.Module):

    def __init__(self, dim, n_heads):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.scale = 1.0 / math.sqrt(self.head_dim)
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x):
        B, T, D = x.shape
        qkv = self.qkv(x).reshape(B, T, 3, self.n_heads, self.head_dim).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = torch.softmax((q @ k.transpose(-2, -1)) * self.scale, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(B, T, D)
        return self.proj(out), attn


class Mlp(nn.Module):

    def __init__(self, dim, hidden):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(F.gelu(self.fc1(x)))


class Block(nn.Module):
    """Pre-norm transformer block"""

    def __init__(self, dim, n_heads, mlp_ratio):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, n_heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def forward(self, x):
        y, attn = self.attn(self.norm1(x))
        x = x + y
        x = x + self.mlp(self.norm2(x))
        return x, attn


class MultiClassTokenViT(nn.Module):

    def __init__(self, config):
        super().__init__()
        self.config = config
        self.patch_embed = PatchEmbedding(config)
        self.class_tokens = nn.Parameter(torch.zeros(1, config.n_classes, config.embed_dim))
        nn.init.trunc_normal_(self.class_tokens, std=0.02)
        self.blocks = nn.ModuleList([
            Block(config.embed_dim, config.n_heads, config.mlp_ratio) for _ in range(config.n_blocks)
        ])
        self.norm = nn.LayerNorm(config.embed_dim)

    def embed_patches(self, images):
        return self.patch_embed(images)

    def forward(self, images):
        patches = self.embed_patches(images)
        x = torch.cat([self.class_tokens.expand(patches.shape[0], -1, -1), patches], dim=1)
        attn = None
        for index, block in enumerate(self.blocks):
            x, attn = block(x)
            if not torch.isfinite(x).all():
                raise NumericalException('non-finite activations after block {}'.format(index),
                                         debug={'block': index})
        x = self.norm(x)
        n_c = self.config.n_classes
        return TokenState(class_tokens=x[:, :n_c], patch_tokens=x[:, n_c:]), AttentionStack(attn=attn)
