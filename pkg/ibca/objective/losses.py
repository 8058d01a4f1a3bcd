"""
Loss composition per ablation variant:

    full        L_VIB + L_t + lambda_s * L_s
    gmm_vib     L_VIB + L_t
    single_vib  L_VIB + L_t   (one Gaussian per class, pi = 1)
    basic       L_mlsm + L_t  (linear spatial mapping, no KL)
"""
from dataclasses import dataclass
from typing import Optional

import torch

from ibca.error_handlers import ConfigurationException
from ibca.model.ceci import cae_loss
from ibca.model.gm_vib import mlsm_loss, vib_loss
from ibca.model.network import Variant


@dataclass
class LossComponents:
    l_vib: Optional[torch.Tensor] = None
    vib_mlsm: Optional[torch.Tensor] = None
    kl: Optional[torch.Tensor] = None
    l_t: Optional[torch.Tensor] = None
    l_s: Optional[torch.Tensor] = None

    def as_floats(self):
        return {name: (None if value is None else value.detach().item()) for name, value in vars(self).items()}


REQUIRED = {
    Variant.full: ('l_vib', 'l_t', 'l_s'),
    Variant.gmm_vib: ('l_vib', 'l_t'),
    Variant.single_vib: ('l_vib', 'l_t'),
    Variant.basic: ('l_vib', 'l_t'),
}


def compute_components(output, targets, config, variant):
    variant = Variant(variant)
    targets = targets.to(output.patch_logits.dtype)
    components = LossComponents(l_t=mlsm_loss(output.token_logits, targets))
    if variant.uses_vib:
        vib = vib_loss(output.patch_logits, targets, output.params, config.beta, textbook=config.textbook_kl)
        components.l_vib, components.vib_mlsm, components.kl = vib.total, vib.mlsm, vib.kl
    else:
        components.vib_mlsm = mlsm_loss(output.patch_logits, targets)
        components.l_vib = components.vib_mlsm
    if variant.uses_cae:
        components.l_s = cae_loss(output.head_attn, output.a_hat)
    return components


def total_loss(components, config, variant=None):
    variant = Variant(variant if variant is not None else config.variant)
    missing = [name for name in REQUIRED[variant] if getattr(components, name) is None]
    if missing:
        raise ConfigurationException('variant {} needs loss components {}'.format(variant.value, ', '.join(missing)))
    loss = components.l_vib + components.l_t
    if variant is Variant.full:
        loss = loss + config.lambda_s * components.l_s
    return loss
