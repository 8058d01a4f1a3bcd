import enum
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn

from ibca.model.backbone import MultiClassTokenViT, TokenState, AttentionStack
from ibca.model.ceci import (ClassWiseLinear, HeadClassAttention, extract_class_attention,
                             class_token_logits, intervention_scores)
from ibca.model.gm_vib import (AttentionKind, GaussianMixtureParams, SpatialAttention, PatchClassFeatures,
                               TokenGrouping, token_grouping, normalize, sample_mixture_weights, sample_attention,
                               class_features, patch_logits)


class Variant(enum.Enum):
    basic = 'basic'
    single_vib = 'single_vib'
    gmm_vib = 'gmm_vib'
    full = 'full'

    @property
    def label(self):
        return VARIANT_LABELS[self]

    @property
    def uses_vib(self):
        return self is not Variant.basic

    @property
    def uses_mixture(self):
        return self in (Variant.gmm_vib, Variant.full)

    @property
    def uses_cae(self):
        return self is Variant.full


VARIANT_LABELS = {
    Variant.basic: 'Basic',
    Variant.single_vib: 'Single VIB',
    Variant.gmm_vib: 'GMM VIB',
    Variant.full: 'Ours',
}


@dataclass
class NetworkOutput:
    tokens: TokenState
    attn: AttentionStack
    params: Optional[GaussianMixtureParams]
    a_hat: SpatialAttention
    z_p: PatchClassFeatures
    patch_logits: torch.Tensor
    token_logits: torch.Tensor
    head_attn: HeadClassAttention


class IBCANetwork(nn.Module):
    """
    Backbone + patch-token path + class-token path for one ablation variant.

    basic replaces token grouping by a linear spatial mapping; single_vib keeps
    one Gaussian per class without mixture weights; gmm_vib and full share the
    full Gaussian-mixture path (full additionally trains with the CAE loss).
    """

    def __init__(self, config, variant=Variant.full):
        super().__init__()
        self.config = config
        self.variant = Variant(variant)
        D, n_c = config.embed_dim, config.n_classes
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(config.seed)
            self.backbone = MultiClassTokenViT(config)
            if self.variant.uses_vib:
                self.grouping = TokenGrouping(D, n_c, mixture=self.variant.uses_mixture)
                self.spatial_mapping = None
            else:
                self.grouping = None
                self.spatial_mapping = nn.Linear(D, n_c)
            self.patch_norm = nn.LayerNorm(D)
        self.intervention_classifier = ClassWiseLinear.average_pooling(n_c, D)

    def spatial_attention(self, f_p, kind, rng=None, alpha0=10.0):
        if self.grouping is None:
            weights = torch.softmax(self.spatial_mapping(normalize(f_p)), dim=1).transpose(1, 2)
            return None, SpatialAttention(weights=weights, kind=AttentionKind.deterministic)
        params = token_grouping(f_p, self.grouping)
        pi_hat = None
        if kind is AttentionKind.sampled and self.variant.uses_mixture:
            pi_hat = sample_mixture_weights(params.pi, alpha0, rng)
        return params, sample_attention(params, f_p, pi_hat, rng, kind)

    def forward(self, images, kind=AttentionKind.deterministic, rng=None, alpha0=10.0):
        tokens, attn = self.backbone(images)
        params, a_hat = self.spatial_attention(tokens.patch_tokens, kind, rng, alpha0)
        z_p = class_features(tokens.patch_tokens, a_hat, self.patch_norm)
        return NetworkOutput(
            tokens=tokens,
            attn=attn,
            params=params,
            a_hat=a_hat,
            z_p=z_p,
            patch_logits=patch_logits(z_p),
            token_logits=class_token_logits(tokens.class_tokens).logits,
            head_attn=extract_class_attention(attn, self.config.n_classes),
        )

    def intervention(self, output):
        return intervention_scores(output.head_attn, output.tokens.patch_tokens,
                                   self.intervention_classifier, self.patch_norm)
