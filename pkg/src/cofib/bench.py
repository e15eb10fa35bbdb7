"""Experiment harness: SNR sweep, resolution sweep and multi-image runs, with CSV/SVG output."""

from __future__ import annotations

import csv
import dataclasses
import math
import time
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .imagekit import Image, add_awgn, psnr, ssim
from .pipeline import DenoiseConfig, denoise_image

DEFAULT_SNRS = tuple(range(-5, 40, 5))
DEFAULT_SIDES = (64, 128, 256)
CSV_HEADER = ["image", "width", "height", "snr_db", "psnr_noisy", "psnr_denoised",
              "ssim_noisy", "ssim_denoised", "wall_time_s", "seed"]


@dataclass
class BenchRecord:
    image_name: str
    width: int
    height: int
    snr_db: float
    psnr_noisy: float
    psnr_denoised: float
    ssim_noisy: float
    ssim_denoised: float
    wall_time_s: float
    seed: int


def run_point(clean: Image, snr_db: float, cfg: DenoiseConfig, noise_seed: int,
              name: str = "image") -> tuple[BenchRecord, Image, Image]:
    """Noise ``clean`` at ``snr_db``, denoise with the known sigma, and score both images."""
    noisy, spec = add_awgn(clean, snr_db, noise_seed)
    run_cfg = dataclasses.replace(cfg, noise_sigma=spec.sigma)
    start = time.perf_counter()
    report = denoise_image(noisy, run_cfg)
    elapsed = time.perf_counter() - start
    rec = BenchRecord(
        image_name=name, width=clean.width, height=clean.height, snr_db=float(snr_db),
        psnr_noisy=psnr(clean, noisy), psnr_denoised=psnr(clean, report.denoised),
        ssim_noisy=ssim(clean, noisy), ssim_denoised=ssim(clean, report.denoised),
        wall_time_s=elapsed, seed=noise_seed,
    )
    return rec, noisy, report.denoised


def run_snr_sweep(clean: Image, snrs=DEFAULT_SNRS, cfg: DenoiseConfig | None = None,
                  seed: int = 0, name: str = "image") -> list[BenchRecord]:
    snrs = list(snrs)
    if not snrs:
        raise ValueError("snrs must be non-empty")
    cfg = dataclasses.replace(cfg or DenoiseConfig(), seed=seed)
    return [run_point(clean, s, cfg, seed + i, name)[0] for i, s in enumerate(snrs)]


def box_downsample(image: Image, side: int) -> Image:
    """Center-crop to the largest multiple of ``side`` that fits, then average f x f blocks."""
    m = min(image.shape)
    if not 1 <= side <= m:
        raise ValueError(f"side {side} must lie in [1, {m}]")
    f = m // side
    span = f * side
    r0 = (image.height - span) // 2
    c0 = (image.width - span) // 2
    crop = image.pixels[r0:r0 + span, c0:c0 + span]
    return image.with_pixels(crop.reshape(side, f, side, f).mean(axis=(1, 3)))


def run_resolution_sweep(clean: Image, sides=DEFAULT_SIDES, snr_db: float = 20.0,
                         cfg: DenoiseConfig | None = None, seed: int = 0,
                         name: str = "image") -> list[BenchRecord]:
    sides = list(sides)
    if not sides:
        raise ValueError("sides must be non-empty")
    for s in sides:
        if s > min(clean.shape):
            raise ValueError(f"side {s} larger than the source image {clean.shape}")
    cfg = dataclasses.replace(cfg or DenoiseConfig(), seed=seed)
    return [run_point(box_downsample(clean, s), snr_db, cfg, seed + i, name)[0]
            for i, s in enumerate(sides)]


def run_image_set(images: dict, snr_db: float = 20.0, cfg: DenoiseConfig | None = None,
                  seed: int = 0) -> list[BenchRecord]:
    """One record per named image, all at the same SNR."""
    cfg = dataclasses.replace(cfg or DenoiseConfig(), seed=seed)
    return [run_point(img, snr_db, cfg, seed + i, name)[0]
            for i, (name, img) in enumerate(images.items())]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6g}"


def emit_csv(records, path, timing: bool = True) -> None:
    """Write records as CSV. With ``timing=False`` the wall time is written as ``nan``
    so repeated runs produce identical bytes."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            wall = r.wall_time_s if timing else math.nan
            w.writerow([r.image_name, r.width, r.height, _fmt(r.snr_db), _fmt(r.psnr_noisy),
                        _fmt(r.psnr_denoised), _fmt(r.ssim_noisy), _fmt(r.ssim_denoised),
                        _fmt(wall), r.seed])


def read_csv(path) -> list[BenchRecord]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {header}")
        return [BenchRecord(row[0], int(row[1]), int(row[2]), *(float(v) for v in row[3:9]),
                            int(row[9])) for row in reader]


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def emit_svg_chart(records, path, title: str = "Denoised PSNR vs input SNR") -> None:
    """Single-polyline SVG 1.1 chart of psnr_denoised against snr_db."""
    pts = [(r.snr_db, r.psnr_denoised) for r in records]
    if not pts:
        raise ValueError("no records to plot")
    pts = [(x, y) for x, y in pts if math.isfinite(y)]
    if not pts:
        raise ValueError("no finite PSNR values to plot")
    W, H, L, R, T, B = 640, 400, 70, 20, 40, 55
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = math.floor(min(ys)) - 1, math.ceil(max(ys)) + 1
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1

    def sx(x):
        return L + (x - x0) / (x1 - x0) * (W - L - R)

    def sy(y):
        return H - B - (y - y0) / (y1 - y0) * (H - T - B)

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
        f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.2f}" y1="{H - B}" x2="{sx(t):.2f}" y2="{H - B + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{H - B + 20}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{L - 5}" y1="{sy(t):.2f}" x2="{L}" y2="{sy(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{L - 8}" y="{sy(t) + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="12">{t:g}</text>')
    out.append(f'<text x="{(L + W - R) / 2:.1f}" y="{H - 12}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">input SNR (dB)</text>')
    out.append(f'<text x="18" y="{(T + H - B) / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="13" transform="rotate(-90 18 {(T + H - B) / 2:.1f})">denoised PSNR (dB)</text>')
    coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
    out.append(f'<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{coords}"/>')
    out.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(out) + "\n")
