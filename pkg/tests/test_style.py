import pytest
import torch

from revisp.style import (
    STATS_EPS,
    StyleCode,
    StyleExtractor,
    StyleHeads,
    adain,
    channel_stats,
    gram_matrix,
)


class TestChannelStats:
    def test_matches_manual_population_stats(self):
        x = torch.rand(2, 4, 8, 8, dtype=torch.float64)
        mu, sigma = channel_stats(x)
        flat = x.reshape(2, 4, -1)
        assert torch.allclose(mu, flat.mean(-1), atol=1e-12)
        assert torch.allclose(sigma, (flat.var(-1, unbiased=False) + STATS_EPS).sqrt(), atol=1e-12)

    def test_requires_4d(self):
        with pytest.raises(ValueError):
            channel_stats(torch.rand(4, 8, 8))

    def test_empty_spatial(self):
        with pytest.raises(ValueError):
            channel_stats(torch.rand(1, 4, 0, 8))


class TestAdain:
    def test_identity_when_style_is_own_stats(self):
        for _ in range(20):
            x = torch.randn(2, 8, 16, 16)
            mu, sigma = channel_stats(x)
            out = adain(x, (mu, sigma))
            assert float((out - x).abs().max()) < 1e-5

    def test_output_stats_match_style_code(self):
        g = torch.Generator().manual_seed(4)
        for _ in range(20):
            x = torch.randn(2, 8, 16, 16, generator=g)
            mu = torch.randn(2, 8, generator=g)
            sigma = torch.rand(2, 8, generator=g) + 0.5
            out = adain(x, (mu, sigma))
            out_mu, out_sigma = channel_stats(out)
            assert float((out_mu - mu).abs().max()) < 1e-4
            assert float((out_sigma - sigma).abs().max()) < 1e-4

    def test_idempotence(self):
        g = torch.Generator().manual_seed(6)
        x = torch.randn(2, 8, 16, 16, generator=g)
        mu = torch.randn(2, 8, generator=g)
        sigma = torch.rand(2, 8, generator=g) + 0.5
        once = adain(x, (mu, sigma))
        twice = adain(once, (mu, sigma))
        assert float((twice - once).abs().max()) < 1e-4

    def test_accepts_style_code(self):
        x = torch.randn(1, 4, 8, 8)
        code = StyleCode(level=1, mu=torch.zeros(1, 4), sigma=torch.ones(1, 4))
        out = adain(x, code)
        mu, _ = channel_stats(out)
        assert float(mu.abs().max()) < 1e-4

    def test_width_mismatch_names_level(self):
        x = torch.randn(1, 4, 8, 8)
        code = StyleCode(level=3, mu=torch.zeros(1, 6), sigma=torch.ones(1, 6))
        with pytest.raises(ValueError, match="level 3"):
            adain(x, code)


class TestGram:
    def test_symmetry_exact(self):
        for _ in range(10):
            g = gram_matrix(torch.randn(2, 8, 8, 8))
            assert torch.equal(g, g.transpose(-1, -2))

    def test_psd(self):
        for _ in range(20):
            g = gram_matrix(torch.randn(2, 16, 8, 8))
            eig = torch.linalg.eigvalsh(g.double())
            assert float(eig.min()) >= -1e-5

    def test_spatial_permutation_invariance(self):
        g = torch.Generator().manual_seed(8)
        x = torch.randn(2, 8, 6, 6, generator=g)
        perm = torch.randperm(36, generator=g)
        shuffled = x.reshape(2, 8, -1)[:, :, perm].reshape(2, 8, 6, 6)
        ga = gram_matrix(x)
        gb = gram_matrix(shuffled)
        assert float((ga - gb).abs().max()) < 1e-6

    def test_normalization_hand_case(self):
        x = torch.ones(1, 2, 2, 2, dtype=torch.float64)
        g = gram_matrix(x)
        # inner product of two all-ones channels is H*W = 4; /(C*H*W) = 4/8
        assert torch.allclose(g, torch.full((1, 2, 2), 0.5, dtype=torch.float64))
        g_raw = gram_matrix(x, normalize=False)
        assert torch.allclose(g_raw, torch.full((1, 2, 2), 4.0, dtype=torch.float64))

    def test_requires_4d(self):
        with pytest.raises(ValueError):
            gram_matrix(torch.rand(8, 8, 8))


class TestExtractorHeads:
    def test_extractor_shapes_and_depth(self):
        ext = StyleExtractor(gram_channels=16, latent_dim=32)
        assert len(ext.layers) == 5
        out = ext(torch.randn(3, 16, 16))
        assert out.shape == (3, 32)

    @torch.no_grad()
    def test_heads_emit_per_level_codes(self):
        heads = StyleHeads(latent_dim=32, level_widths=(4, 8, 16))
        latent = torch.randn(2, 32)
        for level, width in ((1, 4), (2, 8), (3, 16)):
            code = heads(latent, level)
            assert code.level == level
            assert code.mu.shape == (2, width)
            assert code.sigma.shape == (2, width)
            assert float(code.sigma.min()) > 0.0

    def test_invalid_level(self):
        heads = StyleHeads(latent_dim=8, level_widths=(4,))
        with pytest.raises(ValueError, match="level"):
            heads(torch.randn(1, 8), 2)

    def test_codes_depend_on_input(self):
        ext = StyleExtractor(gram_channels=8, latent_dim=16)
        a = ext(torch.randn(1, 8, 8))
        b = ext(torch.randn(1, 8, 8))
        assert not torch.allclose(a, b)
