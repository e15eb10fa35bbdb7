"""Collaborative-filtering image denoiser over learned per-cluster sparse dictionaries."""

from .imagekit import Image, NoiseSpec, add_awgn, load_pgm, psnr, save_pgm, ssim
from .pipeline import DenoiseConfig, DenoiseReport, denoise_image, estimate_sigma

__all__ = [
    "DenoiseConfig", "DenoiseReport", "Image", "NoiseSpec", "add_awgn", "denoise_image",
    "estimate_sigma", "load_pgm", "psnr", "save_pgm", "ssim",
]
__version__ = "0.1.0"
