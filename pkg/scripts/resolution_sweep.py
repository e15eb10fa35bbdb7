"""Denoising at 64, 128 and 256 pixels per side, all at 20 dB input SNR."""

import argparse

from _images import load

from cofib.bench import DEFAULT_SIDES, emit_csv, run_resolution_sweep
from cofib.pipeline import DenoiseConfig

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--image", default="camera", help="PGM path or scikit-image sample name")
ap.add_argument("--snr", type=float, default=20.0)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--out", default="resolution_sweep.csv")
args = ap.parse_args()

records = run_resolution_sweep(load(args.image), DEFAULT_SIDES, args.snr, DenoiseConfig(),
                               args.seed, name=args.image)
emit_csv(records, args.out)
for r in records:
    print(f"{r.width:4d}x{r.height:<4d} PSNR {r.psnr_noisy:6.2f} -> {r.psnr_denoised:6.2f}  "
          f"SSIM {r.ssim_noisy:.3f} -> {r.ssim_denoised:.3f}  {r.wall_time_s:6.1f} s")
