"""Reverse-ISP toolkit: sRGB-to-RAW reconstruction by style removal.

The generator treats the camera pipeline's rendering decisions as a style
injected into the RAW signal, strips it with per-level adaptive instance
normalization driven by a Gram-matrix style extractor, and is trained
adversarially against a wavelet critic. A synthetic, analytically
invertible ISP simulator provides exact ground truth at desk scale.
"""

__version__ = "0.1.0"

from revisp.losses import (
    LossWeights,
    LossReport,
    psnr,
    ssim,
    ms_ssim,
    ms_ssim_loss,
    tv_loss,
    adversarial_losses,
    gradient_penalty,
    composite_loss,
)
from revisp.style import StyleCode, channel_stats, adain, gram_matrix, StyleExtractor, StyleHeads
from revisp.network import (
    ModelConfig,
    EncoderState,
    ReverseISPNet,
    WaveletCritic,
    pixel_shuffle,
    pixel_unshuffle,
    haar_dwt,
    haar_idwt,
    param_count,
)
from revisp.ispsim import IspParams, forward_isp, inverse_isp, sample_isp_params, make_synthetic_pair
from revisp.data import (
    DatasetIndex,
    load_pair,
    load_dataset,
    pack_bayer,
    unpack_bayer,
    save_raw_visualization,
)
from revisp.train import TrainConfig, Trainer, TrainingDiverged, train, evaluate, save_checkpoint, load_checkpoint

__all__ = [
    "LossWeights",
    "LossReport",
    "psnr",
    "ssim",
    "ms_ssim",
    "ms_ssim_loss",
    "tv_loss",
    "adversarial_losses",
    "gradient_penalty",
    "composite_loss",
    "StyleCode",
    "channel_stats",
    "adain",
    "gram_matrix",
    "StyleExtractor",
    "StyleHeads",
    "ModelConfig",
    "EncoderState",
    "ReverseISPNet",
    "WaveletCritic",
    "pixel_shuffle",
    "pixel_unshuffle",
    "haar_dwt",
    "haar_idwt",
    "param_count",
    "IspParams",
    "forward_isp",
    "inverse_isp",
    "sample_isp_params",
    "make_synthetic_pair",
    "DatasetIndex",
    "load_pair",
    "load_dataset",
    "pack_bayer",
    "unpack_bayer",
    "save_raw_visualization",
    "TrainConfig",
    "Trainer",
    "TrainingDiverged",
    "train",
    "evaluate",
    "save_checkpoint",
    "load_checkpoint",
]
