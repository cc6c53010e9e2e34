"""Generator and critic architectures.

The generator is an encoder-decoder: 5 residual encoder blocks, each with
its own adaptive instance normalization fed by the style heads, stride-2
downsampling inside every block, and a PixelShuffle decoder of 4 residual
blocks that consumes resolution-matched skip tensors. The critic scores
concatenated Haar subbands recursively to keep high frequencies honest.
"""

import math
from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from revisp.style import StyleExtractor, StyleHeads, adain, gram_matrix


@dataclass
class ModelConfig:
    n_levels: int = 5
    base_widths: tuple = (64, 128, 256, 512, 512)
    width_multiplier: float = 0.25
    decoder_blocks: int = 4
    decoder_upscales: tuple = (4, 2, 2, 2)
    latent_dim: int = 128
    stem_channels: int = 16
    critic_scales: int = 3
    critic_width: int = 16
    seed: int = 0

    def __post_init__(self):
        self.base_widths = tuple(self.base_widths)
        self.decoder_upscales = tuple(self.decoder_upscales)
        if len(self.base_widths) != self.n_levels:
            raise ValueError(f"need {self.n_levels} encoder widths, got {len(self.base_widths)}")
        if len(self.decoder_upscales) != self.decoder_blocks:
            raise ValueError(
                f"need {self.decoder_blocks} decoder upscale factors, got {len(self.decoder_upscales)}"
            )
        if any(w <= 0 for w in self.base_widths):
            raise ValueError("encoder widths must be positive")
        if math.prod(self.decoder_upscales) != 2 ** self.n_levels:
            raise ValueError(
                f"decoder upscales {self.decoder_upscales} must multiply to 2^{self.n_levels}"
            )
        if self.latent_dim <= 0 or self.stem_channels <= 0:
            raise ValueError("latent_dim and stem_channels must be positive")

    @property
    def widths(self):
        return tuple(max(1, int(round(w * self.width_multiplier))) for w in self.base_widths)

    @property
    def divisor(self):
        return 2 ** self.n_levels


@dataclass
class EncoderState:
    """Per-level encoder outputs.

    post_adain[i] is level i+1's feature map right after its AdaIN, at
    1/2^i of the input resolution; the decoder consumes these as skips.
    features[i] is the downsampled block output; bottleneck == features[-1].
    """

    post_adain: list = field(default_factory=list)
    features: list = field(default_factory=list)

    @property
    def bottleneck(self):
        return self.features[-1]


def pixel_shuffle(x, r):
    """Sub-pixel rearrangement (B, C*r^2, H, W) -> (B, C, rH, rW)."""
    c = x.shape[1]
    if c % (r * r) != 0:
        raise ValueError(f"channel count {c} not divisible by r^2 = {r * r}")
    return F.pixel_shuffle(x, r)


def pixel_unshuffle(x, r):
    """Inverse of pixel_shuffle: (B, C, rH, rW) -> (B, C*r^2, H, W)."""
    h, w = x.shape[-2], x.shape[-1]
    if h % r != 0 or w % r != 0:
        raise ValueError(f"spatial dims {h}x{w} not divisible by r = {r}")
    return F.pixel_unshuffle(x, r)


def haar_dwt(x):
    """Single-level orthonormal Haar analysis -> (LL, LH, HL, HH)."""
    h, w = x.shape[-2], x.shape[-1]
    if h % 2 != 0 or w % 2 != 0:
        raise ValueError(f"Haar transform needs even spatial dims, got {h}x{w}")
    a = x[..., 0::2, 0::2]
    b = x[..., 0::2, 1::2]
    c = x[..., 1::2, 0::2]
    d = x[..., 1::2, 1::2]
    ll = (a + b + c + d) * 0.5
    lh = (a - b + c - d) * 0.5
    hl = (a + b - c - d) * 0.5
    hh = (a - b - c + d) * 0.5
    return ll, lh, hl, hh


def haar_idwt(subbands):
    """Orthonormal Haar synthesis; exact inverse of haar_dwt."""
    ll, lh, hl, hh = subbands
    a = (ll + lh + hl + hh) * 0.5
    b = (ll - lh + hl - hh) * 0.5
    c = (ll + lh - hl - hh) * 0.5
    d = (ll - lh - hl + hh) * 0.5
    out = ll.new_zeros(ll.shape[:-2] + (ll.shape[-2] * 2, ll.shape[-1] * 2))
    out[..., 0::2, 0::2] = a
    out[..., 0::2, 1::2] = b
    out[..., 1::2, 0::2] = c
    out[..., 1::2, 1::2] = d
    return out


class StemBlock(nn.Module):
    """Shallow convolutional stem whose Gram matrix feeds the style trunk."""

    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        return self.act(self.conv2(self.act(self.conv1(x))))


class EncoderBlock(nn.Module):
    """Residual block + AdaIN + stride-2 downsampling."""

    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.shortcut = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()
        self.down = nn.Conv2d(out_ch, out_ch, 3, stride=2, padding=1)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x, code):
        h = self.conv2(self.act(self.conv1(x)))
        h = h + self.shortcut(x)
        h = adain(h, code)
        return h, self.down(self.act(h))


class Encoder(nn.Module):
    def __init__(self, config):
        super().__init__()
        widths = config.widths
        ins = (3,) + widths[:-1]
        self.blocks = nn.ModuleList(EncoderBlock(i, o) for i, o in zip(ins, widths))

    def forward(self, x, codes):
        if len(codes) != len(self.blocks):
            raise ValueError(f"need {len(self.blocks)} style codes, got {len(codes)}")
        state = EncoderState()
        for block, code in zip(self.blocks, codes):
            post, x = block(x, code)
            state.post_adain.append(post)
            state.features.append(x)
        return state


class DecoderBlock(nn.Module):
    """PixelShuffle upsampling followed by a residual fuse of the skip."""

    def __init__(self, in_ch, out_ch, upscale, skip_ch):
        super().__init__()
        ups = []
        cur = in_ch
        r = upscale
        while r > 1:
            ups.append(nn.Conv2d(cur, out_ch * 4, 3, padding=1))
            cur = out_ch
            r //= 2
        if not ups:
            ups.append(nn.Conv2d(cur, out_ch, 3, padding=1))
        self.up_convs = nn.ModuleList(ups)
        self.upscale = upscale
        fuse_in = out_ch + skip_ch
        self.conv1 = nn.Conv2d(fuse_in, out_ch, 3, padding=1)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.shortcut = nn.Conv2d(fuse_in, out_ch, 1) if fuse_in != out_ch else nn.Identity()
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x, skip):
        if self.upscale > 1:
            for conv in self.up_convs:
                x = pixel_shuffle(conv(x), 2)
        else:
            x = self.up_convs[0](x)
        if skip is not None:
            x = torch.cat([x, skip], dim=1)
        h = self.conv2(self.act(self.conv1(x)))
        return self.act(h + self.shortcut(x))


class Decoder(nn.Module):
    """Restores full resolution from the bottleneck and skip tensors."""

    def __init__(self, config):
        super().__init__()
        widths = config.widths
        # carry widths mirror the encoder: each block lands on the width of
        # the level whose skip it will fuse (identity-width when none aligns)
        self.config = config
        blocks = []
        cur_ch = widths[-1]
        cur_div = config.divisor
        self._skip_divisors = []
        for j, r in enumerate(config.decoder_upscales):
            cur_div //= r
            level = self._level_at_divisor(config, cur_div)
            out_ch = widths[level - 1] if level is not None else cur_ch
            skip_ch = widths[level - 1] if level is not None else 0
            blocks.append(DecoderBlock(cur_ch, out_ch, r, skip_ch))
            self._skip_divisors.append(cur_div if level is not None else None)
            cur_ch = out_ch
        self.blocks = nn.ModuleList(blocks)
        self.head = nn.Conv2d(cur_ch, 3, 3, padding=1)

    @staticmethod
    def _level_at_divisor(config, divisor):
        # post_adain of level i sits at 1/2^(i-1) of the input resolution
        for i in range(1, config.n_levels + 1):
            if 2 ** (i - 1) == divisor:
                return i
        return None

    def forward(self, state):
        x = state.bottleneck
        expected = self.config.widths[-1]
        if x.shape[1] != expected:
            raise ValueError(f"bottleneck has {x.shape[1]} channels, config expects {expected}")
        input_h = state.post_adain[0].shape[-2]
        for block, div in zip(self.blocks, self._skip_divisors):
            skip = None
            if div is not None:
                level = self._level_at_divisor(self.config, div)
                skip = state.post_adain[level - 1]
                if skip.shape[-2] * div != input_h:
                    raise ValueError(
                        f"skip for level {level} has height {skip.shape[-2]}, "
                        f"expected {input_h // div}"
                    )
            x = block(x, skip)
        return torch.sigmoid(self.head(x))


class ReverseISPNet(nn.Module):
    """Full sRGB -> RAW style-removal network.

    stem -> Gram -> FC trunk -> per-level heads -> AdaIN encoder -> decoder.
    Output matches the input shape and lives in [0, 1].
    """

    def __init__(self, config=None):
        super().__init__()
        self.config = config or ModelConfig()
        with torch.random.fork_rng():
            torch.manual_seed(self.config.seed)
            self.stem = StemBlock(3, self.config.stem_channels)
            self.extractor = StyleExtractor(self.config.stem_channels, self.config.latent_dim)
            self.heads = StyleHeads(self.config.latent_dim, self.config.widths)
            self.encoder = Encoder(self.config)
            self.decoder = Decoder(self.config)

    def style_codes(self, x):
        gram = gram_matrix(self.stem(x))
        latent = self.extractor(gram)
        return [self.heads(latent, i) for i in range(1, self.config.n_levels + 1)]

    def forward(self, x, pad=True):
        if x.dim() != 4 or x.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) input, got shape {tuple(x.shape)}")
        d = self.config.divisor
        h, w = x.shape[-2], x.shape[-1]
        pad_h = (d - h % d) % d
        pad_w = (d - w % d) % d
        if (pad_h or pad_w) and not pad:
            raise ValueError(f"spatial dims {h}x{w} must be divisible by {d} (or enable padding)")
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="reflect")
        codes = self.style_codes(x)
        state = self.encoder(x, codes)
        out = self.decoder(state)
        if pad_h or pad_w:
            out = out[..., :h, :w]
        return out


class WaveletCritic(nn.Module):
    """Patch critic over recursive Haar subbands; unbounded scores.

    Each scale's four subbands are concatenated and convolved, pooled to a
    common coarse grid, and fused into one score map.
    """

    def __init__(self, config=None):
        super().__init__()
        self.config = config or ModelConfig()
        scales = self.config.critic_scales
        base = self.config.critic_width
        self.scales = scales
        with torch.random.fork_rng():
            torch.manual_seed(self.config.seed + 1)
            branches = []
            for level in range(scales):
                width = base * 2 ** level
                branches.append(
                    nn.Sequential(
                        nn.Conv2d(12, width, 3, padding=1),
                        nn.LeakyReLU(0.2),
                        nn.Conv2d(width, width, 3, padding=1),
                        nn.LeakyReLU(0.2),
                    )
                )
            self.branches = nn.ModuleList(branches)
            total = base * (2 ** scales - 1)
            self.head = nn.Sequential(
                nn.Conv2d(total, base * 4, 3, padding=1),
                nn.LeakyReLU(0.2),
                nn.Conv2d(base * 4, 1, 3, padding=1),
            )

    def min_input_size(self):
        return 2 ** self.scales * 4

    def forward(self, x):
        h, w = x.shape[-2], x.shape[-1]
        need = self.min_input_size()
        if h < need or w < need or h % 2 ** self.scales or w % 2 ** self.scales:
            raise ValueError(
                f"critic with {self.scales} scales needs dims divisible by "
                f"{2 ** self.scales} and >= {need}, got {h}x{w}"
            )
        feats = []
        cur = x
        for level, branch in enumerate(self.branches):
            ll, lh, hl, hh = haar_dwt(cur)
            f = branch(torch.cat([ll, lh, hl, hh], dim=1))
            pool = 2 ** (self.scales - 1 - level)
            if pool > 1:
                f = F.avg_pool2d(f, pool)
            feats.append(f)
            cur = ll
        return self.head(torch.cat(feats, dim=1))


def param_count(config, include_critic=False):
    """Exact trainable-parameter total of the generator (optionally + critic)."""
    model = ReverseISPNet(config)
    total = sum(p.numel() for p in model.parameters() if p.requires_grad)
    if include_critic:
        critic = WaveletCritic(config)
        total += sum(p.numel() for p in critic.parameters() if p.requires_grad)
    return total
