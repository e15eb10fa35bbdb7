"""Denoised PSNR across input SNRs from -5 to 35 dB on one image."""

import argparse

from _images import load

from cofib.bench import DEFAULT_SNRS, box_downsample, emit_csv, emit_svg_chart, run_snr_sweep
from cofib.pipeline import DenoiseConfig

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--image", default="camera", help="PGM path or scikit-image sample name")
ap.add_argument("--side", type=int, default=128, help="box-downsample to this side first (0 = keep)")
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--out", default="snr_sweep")
args = ap.parse_args()

clean = load(args.image)
if args.side:
    clean = box_downsample(clean, args.side)
records = run_snr_sweep(clean, DEFAULT_SNRS, DenoiseConfig(), args.seed, name=args.image)
emit_csv(records, f"{args.out}.csv")
emit_svg_chart(records, f"{args.out}.svg")
for r in records:
    print(f"{r.snr_db:6.1f} dB  PSNR {r.psnr_noisy:6.2f} -> {r.psnr_denoised:6.2f}  "
          f"SSIM {r.ssim_noisy:.3f} -> {r.ssim_denoised:.3f}  {r.wall_time_s:6.1f} s")
