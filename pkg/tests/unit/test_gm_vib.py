import math

import numpy as np
import pytest
import torch

from ibca.error_handlers import ConfigurationException, DomainException
from ibca.model.gm_vib import (LOG_SIGMA_INIT, AttentionKind, GaussianMixtureParams, PatchClassFeatures, SpatialAttention,
                               TokenGrouping, token_grouping, gamma_draws, normalize, normalize_gamma_draws,
                               sample_mixture_weights, sample_attention,
                               class_features, patch_logits, mlsm_loss, kl_divergence, vib_loss)


def _params(mu, sigma, pi=None):
    mu = torch.as_tensor(mu, dtype=torch.float64)
    sigma = torch.as_tensor(sigma, dtype=torch.float64)
    if pi is None:
        pi = torch.ones(mu.shape[:2], dtype=torch.float64)
    return GaussianMixtureParams(mu=mu, sigma=sigma, pi=torch.as_tensor(pi, dtype=torch.float64))


def _attention(weights):
    return SpatialAttention(weights=weights, kind=AttentionKind.deterministic)


class TestTokenGrouping():

    def test_zero_heads(self):
        grouping = TokenGrouping(embed_dim=64, n_classes=4)
        grouping.reset_to_zero()
        params = grouping(torch.randn(2, 16, 64))
        assert tuple(params.mu.shape) == (2, 4, 64)
        assert tuple(params.sigma.shape) == (2, 4, 64)
        assert tuple(params.pi.shape) == (2, 4)
        assert torch.equal(params.mu, torch.zeros(2, 4, 64))
        assert torch.equal(params.sigma, torch.ones(2, 4, 64))
        assert torch.allclose(params.pi, torch.full((2, 4), 0.25))

    def test_default_init_starts_near_mu(self):
        params = TokenGrouping(embed_dim=16, n_classes=4)(torch.randn(2, 9, 16))
        assert torch.allclose(params.sigma, torch.full((2, 4, 16), math.exp(LOG_SIGMA_INIT)))
        assert torch.allclose(params.pi, torch.full((2, 4), 0.25))
        assert params.mu.abs().sum() > 0

    def test_token_grouping_rejects_wrong_width(self):
        with pytest.raises(ConfigurationException):
            token_grouping(torch.randn(2, 9, 8), TokenGrouping(embed_dim=16, n_classes=4))

    def test_single_gaussian_has_unit_weights(self):
        grouping = TokenGrouping(embed_dim=8, n_classes=3, mixture=False)
        assert grouping.pi_head is None
        params = grouping(torch.randn(2, 4, 8))
        assert torch.equal(params.pi, torch.ones(2, 3))

    def test_pi_on_simplex_and_sigma_positive(self):
        params = TokenGrouping(embed_dim=8, n_classes=5)(torch.randn(3, 4, 8) * 10)
        assert torch.allclose(params.pi.sum(dim=-1), torch.ones(3), atol=1e-6)
        assert torch.all(params.sigma > 0)


class TestMixtureWeights():

    def test_gamma_draws_follow_generator(self):
        concentration = torch.full((5, 3), 2.5, dtype=torch.float64)
        first = gamma_draws(concentration, torch.Generator().manual_seed(3))
        second = gamma_draws(concentration, torch.Generator().manual_seed(3))
        assert torch.equal(first, second)
        assert torch.all(first > 0)

    def test_normalize_draws(self):
        pi_hat = normalize_gamma_draws(torch.tensor([2.0, 3.0, 5.0], dtype=torch.float64))
        assert torch.allclose(pi_hat, torch.tensor([0.2, 0.3, 0.5], dtype=torch.float64), atol=1e-12)

    def test_non_positive_alpha0(self):
        with pytest.raises(ConfigurationException):
            sample_mixture_weights(torch.tensor([[0.5, 0.5]]), 0.0)

    def test_simplex(self):
        rng = torch.Generator().manual_seed(0)
        pi = torch.softmax(torch.randn(10000, 4, dtype=torch.float64), dim=-1)
        pi_hat = sample_mixture_weights(pi, 10.0, rng)
        assert torch.all(pi_hat >= 0)
        assert torch.max(torch.abs(pi_hat.sum(dim=-1) - 1)) < 1e-6

    def test_large_alpha0_mean_approaches_pi(self):
        rng = torch.Generator().manual_seed(1)
        pi = torch.tensor([0.2, 0.3, 0.5], dtype=torch.float64)
        pi_hat = sample_mixture_weights(pi.expand(100000, 3), 1e4, rng)
        assert torch.max(torch.abs(pi_hat.mean(dim=0) - pi)) < 0.01

    def test_gradient_reaches_pi(self):
        pi = torch.tensor([[0.3, 0.7]], dtype=torch.float64, requires_grad=True)
        pi_hat = sample_mixture_weights(pi, 10.0, torch.Generator().manual_seed(0))
        pi_hat[0, 0].backward()
        assert torch.isfinite(pi.grad).all()
        assert pi.grad.abs().sum() > 0


class TestSpatialAttention():

    @classmethod
    def setup_class(self):
        torch.manual_seed(0)
        self.f_p = torch.randn(2, 9, 8, dtype=torch.float64)
        self.params = _params(torch.randn(2, 3, 8), torch.rand(2, 3, 8) + 0.1,
                              torch.softmax(torch.randn(2, 3), dim=-1))

    def test_zero_sigma_matches_deterministic(self):
        params = _params(self.params.mu, torch.zeros_like(self.params.sigma), self.params.pi)
        sampled = sample_attention(params, self.f_p, rng=torch.Generator().manual_seed(0))
        deterministic = sample_attention(params, self.f_p, kind=AttentionKind.deterministic)
        assert torch.equal(sampled.weights, deterministic.weights)

    def test_rows_sum_to_mixture_weight(self):
        pi_hat = sample_mixture_weights(self.params.pi, 10.0, torch.Generator().manual_seed(0))
        attention = sample_attention(self.params, self.f_p, pi_hat, torch.Generator().manual_seed(1))
        assert tuple(attention.weights.shape) == (2, 3, 9)
        assert torch.allclose(attention.weights.sum(dim=-1), pi_hat, atol=1e-5)

    def test_single_patch(self):
        pi_hat = torch.tensor([[0.1, 0.6, 0.3]], dtype=torch.float64)
        params = _params(torch.randn(1, 3, 8), torch.ones(1, 3, 8), pi_hat)
        attention = sample_attention(params, torch.randn(1, 1, 8, dtype=torch.float64), pi_hat,
                                     torch.Generator().manual_seed(0))
        assert torch.equal(attention.weights[..., 0], pi_hat)

    def test_fixed_eps(self):
        eps = torch.randn(self.params.mu.shape, dtype=torch.float64)
        first = sample_attention(self.params, self.f_p, eps=eps)
        second = sample_attention(self.params, self.f_p, eps=eps)
        assert torch.equal(first.weights, second.weights)

    def test_reparameterized_gradient(self):
        eps = torch.randn(1, 2, 4, dtype=torch.float64)
        f_p = torch.randn(1, 3, 4, dtype=torch.float64)

        def attention(mu, sigma, pi):
            return sample_attention(GaussianMixtureParams(mu=mu, sigma=sigma, pi=pi), f_p, pi_hat=pi,
                                    eps=eps).weights

        inputs = (torch.randn(1, 2, 4, dtype=torch.float64, requires_grad=True),
                  (torch.rand(1, 2, 4, dtype=torch.float64) + 0.5).requires_grad_(),
                  torch.tensor([[0.4, 0.6]], dtype=torch.float64, requires_grad=True))
        assert torch.autograd.gradcheck(attention, inputs, eps=1e-5, atol=1e-6, rtol=1e-4)


class TestClassFeatures():

    def test_one_hot_selects_patch(self):
        f_p = torch.randn(1, 5, 8, dtype=torch.float64)
        weights = torch.zeros(1, 2, 5, dtype=torch.float64)
        weights[0, 0, 3] = 1.0
        weights[0, 1, 1] = 1.0
        z_p = class_features(f_p, _attention(weights)).z_p
        assert torch.allclose(z_p[0, 0], normalize(f_p)[0, 3], atol=1e-12)
        assert torch.allclose(z_p[0, 1], normalize(f_p)[0, 1], atol=1e-12)

    def test_zero_attention(self):
        z_p = class_features(torch.randn(2, 5, 8), _attention(torch.zeros(2, 3, 5))).z_p
        assert torch.equal(z_p, torch.zeros(2, 3, 8))

    def test_matches_loops(self):
        rng = np.random.default_rng(0)
        f_p = torch.as_tensor(rng.normal(size=(2, 6, 4)))
        weights = torch.as_tensor(rng.random((2, 3, 6)))
        z_p = class_features(f_p, _attention(weights)).z_p.numpy()
        normed = normalize(f_p).numpy()
        for b in range(2):
            for k in range(3):
                for d in range(4):
                    expected = sum(weights[b, k, i].item() * normed[b, i, d] for i in range(6))
                    assert abs(z_p[b, k, d] - expected) < 1e-6

    def test_patch_logits(self):
        z_p = torch.tensor([[[1.0, 2.0, 3.0, 4.0], [5.0, 5.0, 5.0, 5.0]]])
        assert torch.equal(patch_logits(PatchClassFeatures(z_p=z_p)), torch.tensor([[2.5, 5.0]]))
        assert torch.equal(patch_logits(PatchClassFeatures(z_p=torch.zeros(1, 3, 4))), torch.zeros(1, 3))


class TestMlsmLoss():

    def test_zero_logits(self):
        targets = torch.tensor([[1.0, 0.0, 1.0], [0.0, 0.0, 1.0]], dtype=torch.float64)
        loss = mlsm_loss(torch.zeros(2, 3, dtype=torch.float64), targets)
        assert abs(loss.item() - math.log(2)) < 1e-9

    def test_saturation(self):
        loss = mlsm_loss(torch.tensor([[20.0]], dtype=torch.float64), torch.tensor([[1.0]], dtype=torch.float64))
        assert loss.item() < 1e-8

    def test_matches_elementwise_formula(self):
        rng = np.random.default_rng(3)
        logits = rng.normal(scale=3, size=(5, 4))
        targets = (rng.random((5, 4)) < 0.5).astype(np.float64)
        probs = 1 / (1 + np.exp(-logits))
        expected = -(targets * np.log(probs) + (1 - targets) * np.log(1 - probs)).mean()
        loss = mlsm_loss(torch.as_tensor(logits), torch.as_tensor(targets))
        assert abs(loss.item() - expected) < 1e-9


class TestKlDivergence():

    @pytest.mark.parametrize('mu,sigma,expected', [
        (0.0, 1.0, 0.0),
        (1.0, 1.0, 0.5),
        (0.0, math.e, 0.5 * (math.e ** 2 - 2)),
    ])
    def test_single_term(self, mu, sigma, expected):
        kl = kl_divergence(_params([[[mu]]], [[[sigma]]]))
        assert abs(kl.item() - expected) < 1e-12

    def test_standard_normal_is_exactly_zero(self):
        assert kl_divergence(_params(torch.zeros(2, 3, 4), torch.ones(2, 3, 4))).item() == 0.0

    def test_non_positive_sigma(self):
        with pytest.raises(DomainException):
            kl_divergence(_params([[[0.0]]], [[[0.0]]]))

    def test_textbook_offset_identity(self):
        rng = np.random.default_rng(4)
        mu = rng.normal(size=(1, 100, 1))
        sigma = np.exp(rng.uniform(-5, 2, size=(1, 100, 1)))
        for m, s in zip(mu.ravel(), sigma.ravel()):
            published = kl_divergence(_params([[[m]]], [[[s]]])).item()
            textbook = kl_divergence(_params([[[m]]], [[[s]]]), textbook=True).item()
            assert abs(published - (textbook + 0.5 * math.log(s))) < 1e-9

    def test_lower_bound(self):
        bound = 0.25 * (math.log(2) - 1)
        at_minimum = kl_divergence(_params([[[0.0]]], [[[1 / math.sqrt(2)]]])).item()
        assert abs(at_minimum - bound) < 1e-12
        for s in np.exp(np.linspace(-5, 2, 141)):
            single = _params([[[0.0]]], [[[s]]])
            assert kl_divergence(single).item() >= bound - 1e-12
            assert kl_divergence(single, textbook=True).item() >= -1e-12

    def test_textbook_matches_monte_carlo(self):
        rng = np.random.default_rng(5)
        n = 100000
        for _ in range(100):
            mu = rng.normal()
            sigma = math.exp(rng.uniform(-5, 2))
            closed = kl_divergence(_params([[[mu]]], [[[sigma]]]), textbook=True).item()
            z = mu + sigma * rng.standard_normal(n)
            log_q = -0.5 * ((z - mu) / sigma) ** 2 - math.log(sigma)
            log_p = -0.5 * z ** 2
            samples = log_q - log_p
            estimate = samples.mean()
            stderr = samples.std() / math.sqrt(n)
            assert abs(estimate - closed) <= max(0.01 * closed, 4 * stderr)

    def test_vib_loss(self):
        params = _params(torch.zeros(1, 2, 3), torch.ones(1, 2, 3))
        logits = torch.zeros(1, 2, dtype=torch.float64)
        targets = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
        loss = vib_loss(logits, targets, params, beta=0.0)
        assert loss.total.item() == loss.mlsm.item()
        params = _params([[[math.sqrt(2.0)] * 50 + [0.0] * 50]], [[[1.0] * 100]])
        loss = vib_loss(logits, targets, params, beta=0.001)
        assert abs(loss.kl.item() - 50.0) < 1e-9
        assert abs(loss.total.item() - (math.log(2) + 0.05)) < 1e-9

    def test_negative_beta(self):
        with pytest.raises(ConfigurationException):
            vib_loss(torch.zeros(1, 1), torch.zeros(1, 1), _params([[[0.0]]], [[[1.0]]]), beta=-1.0)
