"""Dataset loading, RAW serialization, and Bayer packing.

Layout on disk: <root>/<track>/<split>/{srgb,raw}/<id>.png with matching
ids. sRGB is ordinary 8-bit PNG. RAW is stored as a 16-bit grayscale PNG
with the three channel planes stacked vertically (3H rows by W columns),
plus a small metadata.yaml sidecar per split describing the format.
"""

import os
from dataclasses import dataclass

import numpy as np
import torch
import yaml
from PIL import Image

TRACK_DIMS = {"s7": (504, 504), "p20": (496, 496), "synth": None}

RAW_METADATA = {
    "format": "stacked-planes",
    "bit_depth": 16,
    "channel_order": "rgb",
    "planes": 3,
}


def to_tensor(img):
    """(H, W, 3) float array in [0,1] -> (3, H, W) float32 tensor."""
    return torch.from_numpy(np.ascontiguousarray(img)).float().permute(2, 0, 1)


def to_image(t):
    """(3, H, W) or (B, 3, H, W) tensor -> (H, W, 3) float64 array."""
    if t.dim() == 4:
        if t.shape[0] != 1:
            raise ValueError(f"expected a single image, got batch of {t.shape[0]}")
        t = t[0]
    return t.detach().permute(1, 2, 0).numpy().astype(np.float64)


def save_srgb(path, img):
    """Write an (H, W, 3) float image in [0,1] as 8-bit PNG."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {arr.shape}")
    q = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(q, mode="RGB").save(path, format="PNG")


def load_srgb(path):
    img = Image.open(path)
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def save_raw(path, raw):
    """Write an (H, W, 3) float RAW in [0,1] as one 16-bit stacked-plane PNG."""
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise ValueError(f"expected (H, W, 3) raw image, got {arr.shape}")
    q = np.round(np.clip(arr, 0.0, 1.0) * 65535.0).astype(np.uint16)
    stacked = np.concatenate([q[..., c] for c in range(3)], axis=0)
    Image.fromarray(stacked).save(path, format="PNG")


def load_raw(path):
    img = Image.open(path)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] % 3 != 0:
        raise ValueError(f"{path}: expected stacked 3-plane raw, got shape {arr.shape}")
    h = arr.shape[0] // 3
    planes = [arr[c * h:(c + 1) * h] for c in range(3)]
    return np.stack(planes, axis=-1) / 65535.0


def write_split_metadata(split_dir, track):
    meta = dict(RAW_METADATA, track=track)
    with open(os.path.join(split_dir, "metadata.yaml"), "w") as f:
        yaml.safe_dump(meta, f, sort_keys=True)


@dataclass
class DatasetIndex:
    """Ordered (srgb_path, raw_path) pairs for one track and split."""

    pairs: list
    track: str

    @property
    def expected_dims(self):
        return TRACK_DIMS[self.track]

    def __len__(self):
        return len(self.pairs)

    @classmethod
    def build(cls, root, track, split="train"):
        if track not in TRACK_DIMS:
            raise ValueError(f"unknown track {track!r}, expected one of {sorted(TRACK_DIMS)}")
        srgb_dir = os.path.join(root, track, split, "srgb")
        raw_dir = os.path.join(root, track, split, "raw")
        if not os.path.isdir(srgb_dir) or not os.path.isdir(raw_dir):
            raise FileNotFoundError(f"missing srgb/ or raw/ under {os.path.join(root, track, split)}")
        pairs = []
        for name in sorted(os.listdir(srgb_dir)):
            if not name.lower().endswith(".png"):
                continue
            srgb_path = os.path.join(srgb_dir, name)
            raw_path = os.path.join(raw_dir, name)
            if not os.path.isfile(raw_path):
                raise FileNotFoundError(f"no raw counterpart for {srgb_path}")
            pairs.append((srgb_path, raw_path))
        if not pairs:
            raise FileNotFoundError(f"no image pairs found under {srgb_dir}")
        return cls(pairs=pairs, track=track)


def load_pair(entry, expected_dims=None):
    """Load one (srgb_path, raw_path) pair to float tensors in [0,1].

    No resizing or augmentation happens here; dimensions are checked
    against the track contract when one is given.
    """
    srgb_path, raw_path = entry
    srgb = load_srgb(srgb_path)
    raw = load_raw(raw_path)
    if expected_dims is not None and srgb.shape[:2] != tuple(expected_dims):
        raise ValueError(
            f"{srgb_path}: dims {srgb.shape[:2]} do not match expected {tuple(expected_dims)}"
        )
    if raw.shape != srgb.shape:
        raise ValueError(
            f"{raw_path}: raw dims {raw.shape[:2]} do not match srgb dims {srgb.shape[:2]}"
        )
    return to_tensor(srgb), to_tensor(raw)


def load_dataset(index):
    """Materialize a whole index as (srgb, raw) batch tensors in index order."""
    srgbs, raws = [], []
    for entry in index.pairs:
        s, r = load_pair(entry, index.expected_dims)
        srgbs.append(s)
        raws.append(r)
    return torch.stack(srgbs), torch.stack(raws)


def pack_bayer(mosaic):
    """RGGB mosaic (H, W) -> (H/2, W/2, 4) channel planes (R, G1, G2, B)."""
    m = np.asarray(mosaic)
    if m.ndim != 2:
        raise ValueError(f"expected a single-channel (H, W) mosaic, got shape {m.shape}")
    h, w = m.shape
    if h % 2 or w % 2:
        raise ValueError(f"mosaic dims must be even, got {h}x{w}")
    return np.stack(
        [m[0::2, 0::2], m[0::2, 1::2], m[1::2, 0::2], m[1::2, 1::2]], axis=-1
    )


def unpack_bayer(planes):
    """Exact inverse of pack_bayer."""
    p = np.asarray(planes)
    if p.ndim != 3 or p.shape[-1] != 4:
        raise ValueError(f"expected (H/2, W/2, 4) planes, got shape {p.shape}")
    h, w = p.shape[0] * 2, p.shape[1] * 2
    m = np.empty((h, w), dtype=p.dtype)
    m[0::2, 0::2] = p[..., 0]
    m[0::2, 1::2] = p[..., 1]
    m[1::2, 0::2] = p[..., 2]
    m[1::2, 1::2] = p[..., 3]
    return m


def save_raw_visualization(raw, path, gamma=2.2):
    """Write a gamma-brightened 8-bit preview of a RAW image."""
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise ValueError(f"expected (H, W, 3) raw image, got {arr.shape}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("raw values must lie in [0, 1]")
    preview = np.power(arr, 1.0 / gamma)
    save_srgb(path, preview)
