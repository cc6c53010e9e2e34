"""Training objectives and evaluation metrics.

PSNR/SSIM evaluation, the MS-SSIM and total-variation reconstruction
terms, Wasserstein adversarial losses with gradient penalty, and the
weighted composite objective that ties them together.
"""

import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

# Canonical per-scale weights of multi-scale SSIM; truncated and
# renormalized when fewer scales are used.
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass
class LossWeights:
    """Weights of the composite objective. All must be nonnegative.

    Only the gradient-penalty weight (10) is an established protocol
    value; the remaining defaults are tunable choices.
    """

    lambda_ssim: float = 1.0
    lambda_tv: float = 0.1
    lambda_adv: float = 0.01
    lambda_gp: float = 10.0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if value < 0:
                raise ValueError(f"loss weight for '{name}' must be >= 0, got {value}")

    def as_dict(self):
        return {
            "ssim": self.lambda_ssim,
            "tv": self.lambda_tv,
            "adv": self.lambda_adv,
            "gp": self.lambda_gp,
        }


@dataclass
class LossReport:
    """Composite objective value plus its unweighted per-term breakdown."""

    total: float
    per_term: dict = field(default_factory=dict)


def _check_same_shape(pred, target):
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred.shape)} vs target {tuple(target.shape)}")


def psnr(pred, target, max_val=1.0):
    """Peak signal-to-noise ratio in dB; +inf for an exact match."""
    _check_same_shape(pred, target)
    if max_val <= 0:
        raise ValueError(f"max_val must be > 0, got {max_val}")
    mse = torch.mean((pred.double() - target.double()) ** 2).item()
    if mse == 0.0:
        return float("inf")
    return 10.0 * math.log10(max_val * max_val / mse)


def _gaussian_window(size, sigma, dtype, device):
    coords = torch.arange(size, dtype=dtype, device=device) - (size - 1) / 2.0
    g = torch.exp(-(coords ** 2) / (2.0 * sigma * sigma))
    g = g / g.sum()
    return torch.outer(g, g)


def _ssim_maps(x, y, max_val, window_size, sigma):
    """Per-window luminance*cs map and contrast-structure map (valid windows)."""
    b, c, h, w = x.shape
    if min(h, w) < window_size:
        raise ValueError(
            f"image {h}x{w} smaller than SSIM window; spatial dims must be >= {window_size}"
        )
    win = _gaussian_window(window_size, sigma, x.dtype, x.device)
    win = win.expand(c, 1, window_size, window_size).contiguous()

    mu_x = F.conv2d(x, win, groups=c)
    mu_y = F.conv2d(y, win, groups=c)
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    sigma_xx = F.conv2d(x * x, win, groups=c) - mu_xx
    sigma_yy = F.conv2d(y * y, win, groups=c) - mu_yy
    sigma_xy = F.conv2d(x * y, win, groups=c) - mu_xy

    c1 = (0.01 * max_val) ** 2
    c2 = (0.03 * max_val) ** 2
    cs = (2.0 * sigma_xy + c2) / (sigma_xx + sigma_yy + c2)
    lum = (2.0 * mu_xy + c1) / (mu_xx + mu_yy + c1)
    return lum * cs, cs


def ssim(pred, target, max_val=1.0, window_size=11, sigma=1.5):
    """Mean structural similarity over valid Gaussian windows.

    Returns a 0-dim tensor so the score can participate in autograd.
    """
    _check_same_shape(pred, target)
    ssim_map, _ = _ssim_maps(pred, target, max_val, window_size, sigma)
    return ssim_map.mean()


def max_feasible_scales(height, width, window_size=11):
    """Largest scale count whose coarsest level still fits the window."""
    scales = 0
    h, w = height, width
    while min(h, w) >= window_size:
        scales += 1
        h, w = h // 2, w // 2
    return scales


def ms_ssim(pred, target, max_val=1.0, scales=5, window_size=11, sigma=1.5, weights=None):
    """Multi-scale SSIM: contrast-structure at every scale, luminance at the coarsest."""
    _check_same_shape(pred, target)
    if scales < 1:
        raise ValueError(f"scales must be >= 1, got {scales}")
    h, w = pred.shape[-2], pred.shape[-1]
    feasible = max_feasible_scales(h, w, window_size)
    if scales > feasible:
        raise ValueError(
            f"{h}x{w} image supports at most {feasible} scale(s) with window {window_size}, got {scales}"
        )
    if weights is None:
        weights = MS_SSIM_WEIGHTS[:scales]
    if len(weights) != scales:
        raise ValueError(f"need {scales} scale weights, got {len(weights)}")
    total = sum(weights)
    weights = [wi / total for wi in weights]

    x, y = pred, target
    result = None
    for level in range(scales):
        ssim_map, cs_map = _ssim_maps(x, y, max_val, window_size, sigma)
        if level < scales - 1:
            term = torch.relu(cs_map.mean()) ** weights[level]
            x = F.avg_pool2d(x, 2)
            y = F.avg_pool2d(y, 2)
        else:
            term = torch.relu(ssim_map.mean()) ** weights[level]
        result = term if result is None else result * term
    return result


def ms_ssim_loss(pred, target, max_val=1.0, scales=5, window_size=11, sigma=1.5, weights=None):
    """1 - MS-SSIM, in [0, 1]."""
    return 1.0 - ms_ssim(pred, target, max_val, scales, window_size, sigma, weights)


def tv_loss(img):
    """Anisotropic total variation, averaged per difference position.

    Mean |horizontal diff| plus mean |vertical diff|, each mean taken over
    its own count of neighbor pairs, so the value is resolution-invariant.
    """
    h, w = img.shape[-2], img.shape[-1]
    if h < 2 or w < 2:
        raise ValueError(f"tv_loss needs spatial dims >= 2x2, got {h}x{w}")
    dh = (img[..., :, 1:] - img[..., :, :-1]).abs().mean()
    dv = (img[..., 1:, :] - img[..., :-1, :]).abs().mean()
    return dh + dv


def adversarial_losses(d_real, d_fake):
    """Wasserstein critic objectives: (generator loss, critic loss)."""
    if d_real.numel() == 0 or d_fake.numel() == 0:
        raise ValueError("empty score tensor")
    g_loss = -d_fake.mean()
    d_loss = d_fake.mean() - d_real.mean()
    return g_loss, d_loss


def gradient_penalty(discriminator, real, fake, rng):
    """Mean squared deviation of the critic's input-gradient norm from 1.

    Evaluated at per-sample random interpolates eps*real + (1-eps)*fake,
    eps ~ U(0,1) drawn from `rng`. The penalty weight is applied by the
    caller, not here.
    """
    _check_same_shape(real, fake)
    n = real.shape[0]
    eps = torch.rand((n,) + (1,) * (real.dim() - 1), generator=rng, dtype=real.dtype, device=real.device)
    mixed = eps * real + (1.0 - eps) * fake
    if not mixed.requires_grad:
        mixed.requires_grad_(True)
    scores = discriminator(mixed)
    finite = torch.isfinite(scores.reshape(n, -1)).all(dim=1)
    if not bool(finite.all()):
        bad = int((~finite).nonzero()[0].item())
        raise ValueError(f"discriminator produced non-finite score for sample {bad}")
    grads = torch.autograd.grad(
        outputs=scores,
        inputs=mixed,
        grad_outputs=torch.ones_like(scores),
        create_graph=True,
    )[0]
    norms = grads.reshape(n, -1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def composite_loss(pred, target, d_fake, gp_value, weights, max_val=1.0, scales=5, window_size=11, sigma=1.5):
    """Weighted sum of the four objective terms, with per-term breakdown.

    total = l_ssim*L_ssim + l_tv*L_tv + l_adv*L_adv + l_gp*L_gp, where the
    per-term entries stay unweighted.
    """
    if d_fake.numel() == 0:
        raise ValueError("empty score tensor")
    ssim_term = ms_ssim_loss(pred, target, max_val, scales, window_size, sigma)
    tv_term = tv_loss(pred)
    adv_term = -d_fake.mean()
    per_term = {
        "ssim": float(ssim_term),
        "tv": float(tv_term),
        "adv": float(adv_term),
        "gp": float(gp_value),
    }
    for name, value in per_term.items():
        if not math.isfinite(value):
            raise ValueError(f"loss term '{name}' is non-finite: {value}")
    lam = weights.as_dict()
    total = sum(lam[name] * value for name, value in per_term.items())
    return LossReport(total=total, per_term=per_term)
