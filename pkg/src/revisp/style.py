"""Style representation and removal machinery.

A Gram matrix of shallow stem features summarizes the rendering style of
the input; a fully-connected trunk maps it to a latent code, and per-level
heads turn that code into the (mean, scale) pairs each encoder level's
adaptive instance normalization consumes.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

# Variance floor. Small enough that re-measured stats match the injected
# codes to ~1e-6 on healthy channels; normalized values stay bounded for
# any eps since deviations scale by sqrt(var)/sqrt(var+eps) <= 1.
STATS_EPS = 1e-8


@dataclass
class StyleCode:
    """Per-level affine parameters for adaptive instance normalization.

    mu and sigma are (C,) or (B, C) tensors; sigma is strictly positive.
    """

    level: int
    mu: torch.Tensor
    sigma: torch.Tensor


def channel_stats(features, eps=STATS_EPS):
    """Per-channel spatial mean and epsilon-floored standard deviation.

    Returns (mu, sigma), each (B, C). sigma = sqrt(population var + eps),
    so constant channels come back with sigma = sqrt(eps) instead of 0.
    """
    if features.dim() != 4:
        raise ValueError(f"expected (B, C, H, W) features, got shape {tuple(features.shape)}")
    if features.shape[-1] == 0 or features.shape[-2] == 0:
        raise ValueError("features have empty spatial extent")
    mu = features.mean(dim=(2, 3))
    var = features.var(dim=(2, 3), unbiased=False)
    sigma = torch.sqrt(var + eps)
    return mu, sigma


def _as_affine(style, channels):
    if isinstance(style, StyleCode):
        mu, sigma, level = style.mu, style.sigma, style.level
    else:
        mu, sigma = style
        level = None
    if mu.shape[-1] != channels or sigma.shape[-1] != channels:
        where = f"level {level} " if level is not None else ""
        raise ValueError(
            f"style code {where}has width {mu.shape[-1]}, features have {channels} channels"
        )
    shape = (1, channels, 1, 1) if mu.dim() == 1 else (mu.shape[0], channels, 1, 1)
    return mu.reshape(shape), sigma.reshape(shape)


def adain(content, style, eps=STATS_EPS):
    """Adaptive instance normalization: re-statistic each channel.

    Per channel: sigma_y * (x - mu_x) / sigma_x + mu_y, with (mu_x, sigma_x)
    taken from channel_stats so style = channel_stats(content) is a fixed
    point.
    """
    mu_x, sigma_x = channel_stats(content, eps)
    mu_y, sigma_y = _as_affine(style, content.shape[1])
    mu_x = mu_x.reshape(content.shape[0], content.shape[1], 1, 1)
    sigma_x = sigma_x.reshape(content.shape[0], content.shape[1], 1, 1)
    return sigma_y * (content - mu_x) / sigma_x + mu_y


def gram_matrix(features, normalize=True):
    """Channel-by-channel inner products over spatial positions.

    (B, C, H, W) -> (B, C, C), symmetrized exactly; divided by C*H*W when
    normalize is set so magnitudes are resolution-independent.
    """
    if features.dim() != 4:
        raise ValueError(f"expected (B, C, H, W) features, got shape {tuple(features.shape)}")
    b, c, h, w = features.shape
    if h == 0 or w == 0:
        raise ValueError("features have empty spatial extent")
    flat = features.reshape(b, c, h * w)
    gram = torch.bmm(flat, flat.transpose(1, 2))
    gram = 0.5 * (gram + gram.transpose(1, 2))
    if normalize:
        gram = gram / float(c * h * w)
    return gram


class StyleExtractor(nn.Module):
    """Maps a flattened Gram matrix to the style latent through 5 FC layers."""

    def __init__(self, gram_channels, latent_dim, n_layers=5):
        super().__init__()
        dims = [gram_channels * gram_channels] + [latent_dim] * n_layers
        self.layers = nn.ModuleList(nn.Linear(dims[i], dims[i + 1]) for i in range(n_layers))
        self.act = nn.LeakyReLU(0.2)

    def forward(self, gram):
        x = gram.flatten(1)
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = self.act(x)
        return x


class StyleHeads(nn.Module):
    """One fully-connected head per encoder level, emitting (mu, sigma).

    sigma goes through softplus plus a small floor so it stays positive.
    """

    def __init__(self, latent_dim, level_widths):
        super().__init__()
        self.level_widths = tuple(level_widths)
        self.heads = nn.ModuleList(nn.Linear(latent_dim, 2 * c) for c in self.level_widths)

    def forward(self, latent, level):
        if not 1 <= level <= len(self.heads):
            raise ValueError(f"level must be in [1, {len(self.heads)}], got {level}")
        width = self.level_widths[level - 1]
        out = self.heads[level - 1](latent)
        mu, raw_sigma = out[..., :width], out[..., width:]
        sigma = F.softplus(raw_sigma) + STATS_EPS
        return StyleCode(level=level, mu=mu, sigma=sigma)
