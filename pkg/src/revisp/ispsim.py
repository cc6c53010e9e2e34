"""Synthetic camera pipeline with an exact closed-form inverse.

Stages: white balance gains, a 3x3 color matrix, a smooth tone knee
y = x / (x + k(1 - x)), gamma compression, and a final clip. Every stage
is strictly monotone on [0, 1] for the parameter ranges the sampler
draws, so composing the stage inverses recovers the RAW image exactly
wherever the forward pass did not clip.
"""

from dataclasses import dataclass, field

import numpy as np

GAIN_RANGE = (0.5, 2.5)
GAMMA_RANGE = (1.5, 2.8)
KNEE_RANGE = (0.4, 1.0)


@dataclass
class IspParams:
    gains: np.ndarray = field(default_factory=lambda: np.ones(3))
    ccm: np.ndarray = field(default_factory=lambda: np.eye(3))
    knee: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=np.float64)
        self.ccm = np.asarray(self.ccm, dtype=np.float64)
        if self.gains.shape != (3,):
            raise ValueError(f"gains must have shape (3,), got {self.gains.shape}")
        if np.any(self.gains <= 0):
            raise ValueError("white balance gains must be positive")
        if self.ccm.shape != (3, 3):
            raise ValueError(f"ccm must have shape (3, 3), got {self.ccm.shape}")
        if abs(np.linalg.det(self.ccm)) < 1e-8:
            raise ValueError("ccm is singular, pipeline would not be invertible")
        if not self.knee > 0:
            raise ValueError(f"knee must be positive, got {self.knee}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def to_dict(self):
        return {
            "gains": self.gains.tolist(),
            "ccm": self.ccm.tolist(),
            "knee": float(self.knee),
            "gamma": float(self.gamma),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(gains=np.array(d["gains"]), ccm=np.array(d["ccm"]),
                   knee=float(d["knee"]), gamma=float(d["gamma"]))


def sample_isp_params(rng=None):
    """Draw a random but well-conditioned, monotone parameter set."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    gains = rng.uniform(*GAIN_RANGE, size=3)
    # convex blend of identity and a random row-stochastic matrix keeps all
    # entries nonnegative and the matrix comfortably invertible
    mix = rng.uniform(0.0, 0.3)
    s = rng.uniform(0.1, 1.0, size=(3, 3))
    s /= s.sum(axis=1, keepdims=True)
    ccm = (1.0 - mix) * np.eye(3) + mix * s
    knee = rng.uniform(*KNEE_RANGE)
    gamma = rng.uniform(*GAMMA_RANGE)
    return IspParams(gains=gains, ccm=ccm, knee=knee, gamma=gamma)


def _check_image(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[-1] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def _tone(x, k):
    return x / (x + k * (1.0 - x))


def _tone_inverse(y, k):
    return k * y / (k * y + 1.0 - y)


def forward_isp(raw, params, return_mask=False):
    """RAW in [0,1] -> sRGB in [0,1]; optionally also the saturation mask."""
    x = _check_image(raw, "raw")
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValueError("raw values must lie in [0, 1]")
    y = x * params.gains
    y = y @ params.ccm.T
    y = np.clip(y, 0.0, None)
    y = _tone(y, params.knee)
    y = np.power(np.clip(y, 0.0, None), 1.0 / params.gamma)
    mask = y >= 1.0
    y = np.clip(y, 0.0, 1.0)
    if return_mask:
        return y, mask
    return y


def inverse_isp(srgb, params, return_mask=False):
    """Exact stage-by-stage inverse of forward_isp.

    Pixels at 1.0 in any channel may have been clipped; they are flagged in
    the saturation mask and are the only pixels the round trip can miss.
    """
    y = _check_image(srgb, "srgb")
    if y.min() < 0.0 or y.max() > 1.0:
        raise ValueError("srgb values must lie in [0, 1]")
    mask = y >= 1.0
    x = np.power(y, params.gamma)
    x = _tone_inverse(x, params.knee)
    x = x @ np.linalg.inv(params.ccm).T
    x = x / params.gains
    x = np.clip(x, 0.0, 1.0)
    if return_mask:
        return x, mask
    return x


def make_synthetic_pair(shape=(64, 64), rng=None, params=None, amplitude=0.8):
    """Random smooth RAW image plus its rendered sRGB counterpart.

    Sums a few random low-frequency cosine gratings per channel, scaled so
    the RAW stays inside [0, amplitude] and the forward pass rarely clips.
    Returns (raw, srgb, params).
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if params is None:
        params = sample_isp_params(rng)
    if not 0.0 < amplitude <= 1.0:
        raise ValueError(f"amplitude must be in (0, 1], got {amplitude}")
    h, w = shape
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    raw = np.zeros((h, w, 3))
    for c in range(3):
        acc = np.zeros((h, w))
        for _ in range(4):
            fy, fx = rng.uniform(0.3, 3.0, size=2)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            acc += rng.uniform(0.3, 1.0) * np.cos(
                2.0 * np.pi * (fy * yy / h + fx * xx / w) + phase
            )
        acc -= acc.min()
        if acc.max() > 0:
            acc /= acc.max()
        raw[..., c] = acc
    raw = raw * amplitude * rng.uniform(0.6, 1.0)
    srgb = forward_isp(raw, params)
    return raw, srgb, params
