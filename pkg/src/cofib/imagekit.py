"""Grayscale images, PGM I/O, AWGN synthesis and PSNR/SSIM metrics."""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Image:
    """A 2-D grayscale image; ``pixels`` is (height, width), row-major."""

    pixels: np.ndarray
    range_max: float = 255.0

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise ValueError(f"expected a non-empty 2-D array, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("image contains non-finite values")
        if not self.range_max > 0:
            raise ValueError("range_max must be positive")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "range_max", float(self.range_max))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def with_pixels(self, pixels: np.ndarray) -> Image:
        return Image(pixels, self.range_max)


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float
    seed: int
    sigma: float


class PGMError(ValueError):
    pass


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens = []
    pos = 0
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PGMError("malformed PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens, pos


def load_pgm(path) -> Image:
    """Read a P2 (ASCII) or P5 (binary) PGM file."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] not in (b"P2", b"P5"):
        raise PGMError(f"{path}: not a P2/P5 PGM file")
    try:
        tokens, pos = _header_tokens(data, 4)
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PGMError(f"{path}: malformed PGM header") from exc
    if width <= 0 or height <= 0:
        raise PGMError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval <= 65535:
        raise PGMError(f"{path}: maxval {maxval} out of range")
    n = width * height

    if tokens[0] == b"P2":
        body = re.sub(rb"#[^\n]*", b"", data[pos:]).split()
        if len(body) < n:
            raise PGMError(f"{path}: truncated raster ({len(body)} of {n} values)")
        try:
            values = np.array([int(v) for v in body[:n]], dtype=np.float64)
        except ValueError as exc:
            raise PGMError(f"{path}: non-integer raster value") from exc
        if values.min() < 0 or values.max() > maxval:
            raise PGMError(f"{path}: raster value outside [0, {maxval}]")
    else:
        # exactly one whitespace byte separates the header from the raster
        raster = data[pos + 1:]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        if len(raster) < n * dtype.itemsize:
            raise PGMError(f"{path}: truncated raster")
        values = np.frombuffer(raster, dtype=dtype, count=n).astype(np.float64)
        if values.max() > maxval:
            raise PGMError(f"{path}: raster value outside [0, {maxval}]")
    return Image(values.reshape(height, width), float(maxval))


def save_pgm(image: Image, path, binary: bool = True) -> None:
    """Write ``image`` as PGM, clamping to [0, range_max] and rounding to integer levels."""
    maxval = int(round(image.range_max))
    if not 0 < maxval <= 65535:
        raise PGMError(f"range_max {image.range_max} cannot be stored as PGM")
    levels = np.clip(np.rint(np.clip(image.pixels, 0.0, image.range_max)), 0, maxval)
    levels = levels.astype(np.int64)
    header = f"{'P5' if binary else 'P2'}\n{image.width} {image.height}\n{maxval}\n".encode()
    if binary:
        dtype = ">u2" if maxval > 255 else "u1"
        body = levels.astype(dtype).tobytes()
    else:
        body = "\n".join(" ".join(str(v) for v in row) for row in levels).encode() + b"\n"
    with open(os.fspath(path), "wb") as f:
        f.write(header + body)


def noise_sigma_for_snr(clean: Image, snr_db: float) -> float:
    power = float(np.mean(clean.pixels ** 2))
    if power == 0.0:
        raise ValueError("SNR is undefined for an all-zero image")
    return math.sqrt(power / 10.0 ** (snr_db / 10.0))


def add_awgn(clean: Image, snr_db: float, seed: int) -> tuple[Image, NoiseSpec]:
    """Add white Gaussian noise at ``snr_db``, with signal power = mean(clean**2).

    The noisy pixels are not clamped.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    sigma = noise_sigma_for_snr(clean, snr_db)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(clean.shape) * sigma
    return clean.with_pixels(clean.pixels + noise), NoiseSpec(float(snr_db), int(seed), sigma)


def _check_pair(reference: Image, test: Image) -> None:
    if reference.shape != test.shape:
        raise ValueError(f"dimension mismatch: {reference.shape} vs {test.shape}")


def mse(reference: Image, test: Image) -> float:
    _check_pair(reference, test)
    return float(np.mean((reference.pixels - test.pixels) ** 2))


def psnr(reference: Image, test: Image) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    err = mse(reference, test)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(reference.range_max ** 2 / err)


SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    win = len(g)
    rows = np.lib.stride_tricks.sliding_window_view(x, win, axis=0) @ g
    return np.lib.stride_tricks.sliding_window_view(rows, win, axis=1) @ g


def ssim_map(reference: Image, test: Image) -> np.ndarray:
    _check_pair(reference, test)
    if min(reference.shape) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    c1 = (0.01 * reference.range_max) ** 2
    c2 = (0.03 * reference.range_max) ** 2
    g = _gaussian_kernel()
    x, y = reference.pixels, test.pixels
    mu_x = _filter_valid(x, g)
    mu_y = _filter_valid(y, g)
    var_x = _filter_valid(x * x, g) - mu_x * mu_x
    var_y = _filter_valid(y * y, g) - mu_y * mu_y
    cov = _filter_valid(x * y, g) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def ssim(reference: Image, test: Image) -> float:
    """Mean SSIM over valid 11x11 Gaussian (sd 1.5) windows, K1=0.01, K2=0.03."""
    return float(np.mean(ssim_map(reference, test)))
