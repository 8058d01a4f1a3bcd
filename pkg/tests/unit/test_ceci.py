import math

import numpy as np
import pytest
import torch

from ibca.error_handlers import ShapeException
from ibca.model.backbone import AttentionStack
from ibca.model.ceci import (ClassWiseLinear, HeadClassAttention, extract_class_attention, class_token_logits,
                             row_cosine_loss, cae_loss, intervention_scores)
from ibca.model.gm_vib import AttentionKind, SpatialAttention


def _identity(x):
    return x


def _logit(p):
    return math.log(p / (1 - p))


class TestExtractClassAttention():

    def test_shapes(self):
        attn = torch.softmax(torch.randn(2, 2, 7, 7), dim=-1)
        a_l = extract_class_attention(AttentionStack(attn=attn), n_classes=3).a_l
        assert tuple(a_l.shape) == (2, 2, 3, 4)

    def test_identity_patch_affinity(self):
        attn = torch.zeros(1, 1, 7, 7)
        attn[0, 0, :3] = torch.softmax(torch.randn(3, 7), dim=-1)
        attn[0, 0, 3:, 3:] = torch.eye(4)
        a_l = extract_class_attention(AttentionStack(attn=attn), n_classes=3).a_l
        assert torch.equal(a_l[0, 0], attn[0, 0, :3, 3:])

    def test_too_few_tokens(self):
        with pytest.raises(ShapeException):
            extract_class_attention(AttentionStack(attn=torch.ones(1, 1, 3, 3) / 3), n_classes=3)

    def test_matches_loops(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n_c = int(rng.integers(1, 5))
            n_p = int(rng.integers(1, 6))
            H = int(rng.integers(1, 4))
            T = n_c + n_p
            attn = rng.random((1, H, T, T))
            attn /= attn.sum(axis=-1, keepdims=True)
            a_l = extract_class_attention(AttentionStack(attn=torch.as_tensor(attn)), n_c).a_l.numpy()
            for h in range(H):
                for k in range(n_c):
                    for j in range(n_p):
                        expected = sum(attn[0, h, k, n_c + i] * attn[0, h, n_c + i, n_c + j] for i in range(n_p))
                        assert abs(a_l[0, h, k, j] - expected) < 1e-6


class TestClassTokenLogits():

    @pytest.mark.parametrize('row,expected', [
        ([3.0, 3.0, 3.0], 3.0),
        ([0.0, 0.0], 0.0),
        ([-1.0, 1.0], 0.0),
    ])
    def test_mean(self, row, expected):
        logits = class_token_logits(torch.tensor([[row]])).logits
        assert logits.item() == expected


class TestCaeLoss():

    def test_identical_inputs(self):
        weights = torch.softmax(torch.randn(2, 3, 9, dtype=torch.float64), dim=-1)
        head_attn = HeadClassAttention(a_l=weights.unsqueeze(1).repeat(1, 4, 1, 1))
        loss = cae_loss(head_attn, SpatialAttention(weights=weights, kind=AttentionKind.deterministic))
        assert abs(loss.item()) < 1e-9

    def test_orthogonal_rows(self):
        loss = row_cosine_loss(torch.tensor([[1.0, 0.0]]), torch.tensor([[0.0, 1.0]]))
        assert loss.item() == 1.0

    def test_matches_cosine_oracle(self):
        rng = np.random.default_rng(1)
        heads = rng.random((2, 3, 4, 5))
        target = rng.random((2, 4, 5))
        loss = cae_loss(HeadClassAttention(a_l=torch.as_tensor(heads)),
                        SpatialAttention(weights=torch.as_tensor(target), kind=AttentionKind.sampled)).item()
        sh, st = 1 / (1 + np.exp(-heads)), 1 / (1 + np.exp(-target))
        per_row = []
        for b in range(2):
            for h in range(3):
                for k in range(4):
                    u, v = sh[b, h, k], st[b, k]
                    per_row.append(1 - u.dot(v) / (np.linalg.norm(u) * np.linalg.norm(v)))
        assert abs(loss - np.mean(per_row)) < 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ShapeException):
            cae_loss(HeadClassAttention(a_l=torch.zeros(1, 2, 3, 4)),
                     SpatialAttention(weights=torch.zeros(1, 3, 5), kind=AttentionKind.sampled))

    def test_symmetric_in_its_arguments(self):
        a = torch.rand(2, 1, 3, 4, dtype=torch.float64)
        b = torch.rand(2, 1, 3, 4, dtype=torch.float64)
        forward = cae_loss(HeadClassAttention(a_l=a), SpatialAttention(weights=b[:, 0], kind=AttentionKind.sampled))
        backward = cae_loss(HeadClassAttention(a_l=b), SpatialAttention(weights=a[:, 0], kind=AttentionKind.sampled))
        assert abs(forward.item() - backward.item()) < 1e-12

    def test_gradients(self):
        def loss(heads, target):
            return cae_loss(HeadClassAttention(a_l=heads), SpatialAttention(weights=target, kind=AttentionKind.sampled))

        inputs = (torch.rand(2, 2, 3, 4, dtype=torch.float64, requires_grad=True),
                  torch.rand(2, 3, 4, dtype=torch.float64, requires_grad=True))
        assert torch.autograd.gradcheck(loss, inputs, eps=1e-5, atol=1e-8, rtol=1e-4)


class TestInterventionScores():

    @classmethod
    def setup_class(self):
        torch.manual_seed(0)
        self.f_p = torch.randn(2, 6, 8, dtype=torch.float64)
        self.classifier = ClassWiseLinear(3, 8).double()
        with torch.no_grad():
            self.classifier.weight.normal_()
            self.classifier.bias.normal_()

    @classmethod
    def teardown_class(self):
        self.classifier = None

    def test_identical_heads(self):
        single = torch.softmax(torch.randn(2, 1, 3, 6, dtype=torch.float64), dim=-1)
        one = intervention_scores(HeadClassAttention(a_l=single), self.f_p, self.classifier)
        many = intervention_scores(HeadClassAttention(a_l=single.repeat(1, 4, 1, 1)), self.f_p, self.classifier)
        assert torch.max(torch.abs(one - many)) < 1e-9

    def test_two_heads(self):
        a_l = torch.tensor([[[[_logit(0.2)]], [[_logit(0.8)]]]], dtype=torch.float64)
        classifier = ClassWiseLinear(1, 1).double()
        with torch.no_grad():
            classifier.weight.fill_(1.0)
        scores = intervention_scores(HeadClassAttention(a_l=a_l), torch.ones(1, 1, 1, dtype=torch.float64),
                                     classifier, norm=_identity)
        assert abs(scores.item() - 0.5) < 1e-9

    def test_zero_classifier(self):
        a_l = torch.rand(2, 3, 3, 6, dtype=torch.float64)
        scores = intervention_scores(HeadClassAttention(a_l=a_l), self.f_p, ClassWiseLinear(3, 8).double())
        assert torch.equal(scores, torch.full((2, 3), 0.5, dtype=torch.float64))

    def test_head_permutation(self):
        a_l = torch.rand(2, 5, 3, 6, dtype=torch.float64)
        scores = intervention_scores(HeadClassAttention(a_l=a_l), self.f_p, self.classifier)
        permuted = intervention_scores(HeadClassAttention(a_l=a_l[:, [3, 0, 4, 2, 1]]), self.f_p, self.classifier)
        assert torch.equal(scores, permuted)

    def test_average_pooling_readout_is_frozen(self):
        clf = ClassWiseLinear.average_pooling(3, 4)
        assert not any(p.requires_grad for p in clf.parameters())
        features = torch.tensor([[[1.0, 2.0, 3.0, 4.0]] * 3])
        assert torch.allclose(clf(features), torch.full((1, 3), 2.5))
