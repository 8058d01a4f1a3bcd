"""
Contrastive enhancement-based causal intervention.

Every head of the last block yields one class-specific attention sample
A^l = A_c2p . A_p2p. The samples are aligned with the Gaussian-mixture spatial
attention through the CAE loss, and averaged with uniform weight 1/H in the
backdoor diagnostic ``intervention_scores``.
"""
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ibca.error_handlers import ShapeException
from ibca.model.gm_vib import normalize


@dataclass
class HeadClassAttention:
    a_l: torch.Tensor  # [batch, H, N_c, N_p^2]


@dataclass
class ClassTokenLogits:
    logits: torch.Tensor  # [batch, N_c]


class ClassWiseLinear(nn.Module):
    """
    One scalar readout per class: Clf_k(x) = <w_k, x> + b_k
    """

    def __init__(self, n_classes, embed_dim):
        super().__init__()
        self.weight = nn.Parameter(torch.zeros(n_classes, embed_dim))
        self.bias = nn.Parameter(torch.zeros(n_classes))

    @classmethod
    def average_pooling(cls, n_classes, embed_dim):
        """Frozen GAP readout (weights 1/D, bias 0)"""
        clf = cls(n_classes, embed_dim)
        with torch.no_grad():
            clf.weight.fill_(1.0 / embed_dim)
        clf.requires_grad_(False)
        return clf

    def forward(self, features):
        # features [..., N_c, D]
        return (features * self.weight).sum(dim=-1) + self.bias


def extract_class_attention(attn, n_classes):
    weights = attn.attn
    T = weights.shape[-1]
    if T <= n_classes:
        raise ShapeException('{} tokens cannot hold {} class tokens plus patches'.format(T, n_classes))
    c2p = weights[:, :, :n_classes, n_classes:]
    p2p = weights[:, :, n_classes:, n_classes:]
    return HeadClassAttention(a_l=c2p @ p2p)


def class_token_logits(f_t):
    return ClassTokenLogits(logits=f_t.mean(dim=-1))


def row_cosine_loss(a, b):
    """1 - cosine similarity along the last axis"""
    return 1.0 - F.cosine_similarity(a, b, dim=-1)


def cae_loss(head_attn, a_hat):
    heads = head_attn.a_l
    target = a_hat.weights
    if heads.shape[-2:] != target.shape[-2:]:
        raise ShapeException('head attention {} and spatial attention {} differ in (N_c, N_p^2)'.format(
            tuple(heads.shape[-2:]), tuple(target.shape[-2:])))
    per_row = row_cosine_loss(torch.sigmoid(heads), torch.sigmoid(target).unsqueeze(1))
    # [batch, H, N_c] -> mean over classes, heads, batch
    return per_row.mean()


@torch.no_grad()
def intervention_scores(head_attn, f_p, classifier, norm=normalize):
    """
    Uniform 1/H average over heads of sigmoid(Clf_k(A^l_k . Norm(F_p)))
    """
    features = torch.einsum('bhkp,bpd->bhkd', head_attn.a_l, norm(f_p))
    scores = torch.sigmoid(classifier(features))
    # sorted so the summation order does not depend on head order
    return torch.sort(scores, dim=1).values.mean(dim=1)
